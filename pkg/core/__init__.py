"""
SAN engine, state-space generation, transient solver and infrastructure
"""
