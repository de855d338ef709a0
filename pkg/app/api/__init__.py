"""
API endpoints untuk Perfect Sim
"""
