# VSDesign 🚀, GPL-3.0 license
"""
utils/initialization
"""
