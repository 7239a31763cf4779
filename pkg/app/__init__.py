"""
病房传播模型 MCMC - 数据增广贝叶斯推断
"""

__version__ = "1.0.0"
