"""
Perfect Sim - perfect simulation Markov chain dengan coupled chains
"""
