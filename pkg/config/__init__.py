"""
配置层，包含求解参数与并行/计时管理。
"""
