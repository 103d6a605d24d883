"""fracnet version, defined out of __init__.py to avoid circular reference"""
VERSION = (0, 1, 'dev0')
