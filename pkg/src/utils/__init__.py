"""
Utility modules for the Citrinet speech-recognition toolkit.
"""
