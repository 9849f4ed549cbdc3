"""Payment Service Tests"""
