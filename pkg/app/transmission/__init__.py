"""传播模型"""
