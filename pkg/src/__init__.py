"""
Grand-Canonical Kac Reservoir Toolkit
"""
