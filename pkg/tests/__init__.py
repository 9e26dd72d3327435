"""
Test suite for the ccd finite-size lab package.
"""
