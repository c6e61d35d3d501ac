"""
Method handlers: each runs one pipeline through the services and writes its tables
"""
