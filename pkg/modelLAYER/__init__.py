"""
模型层，包含类型扰动分布、QRE 求解器与模型管理器。
"""
