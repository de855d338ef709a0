"""
Modul inti: konfigurasi, error, logging, dan stream acak
"""
