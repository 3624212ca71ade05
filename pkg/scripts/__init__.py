# scripts/__init__.py
"""Maintenance scripts package for SAGE"""

__all__ = []
