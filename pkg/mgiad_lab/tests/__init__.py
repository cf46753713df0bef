"""
Test suite for MGiaD Lab.

Unit tests for every library package plus end-to-end CLI tests. Long
training checks carry the ``slow`` marker.
"""
