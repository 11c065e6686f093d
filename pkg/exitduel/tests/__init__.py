"""
Test module

"""

__all__ = []
