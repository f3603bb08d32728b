"""
SkIn - Skimming-Intensive Long-Text Classification
A cheap encoder skims every segment; a strong encoder reads only the key segment.
"""

__version__ = "0.1.0"
