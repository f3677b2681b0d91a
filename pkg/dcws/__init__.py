"""
DCWS - Data Consistent Weak Supervision
"""

__version__ = "0.1.0"
__author__ = "DCWS Team"
