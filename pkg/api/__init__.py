"""
Study command surface and data models
"""
