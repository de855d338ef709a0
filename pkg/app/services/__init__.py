"""
Service modules untuk Perfect Sim: kernel, coupling, engine, statistik, eksperimen
"""
