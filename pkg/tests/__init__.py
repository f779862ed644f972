"""
Test Suite for the RAFT Performability Toolkit
"""
