"""
DCWS - Test Suite
"""
