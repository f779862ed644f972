"""
Parameter presets
"""
