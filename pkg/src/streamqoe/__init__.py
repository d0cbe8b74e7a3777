"""
streamqoe: QoE modeling for adaptive video streaming sessions.

The distribution and the importable module are both named `streamqoe`.
"""

__all__ = []
