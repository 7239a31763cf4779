"""前向模拟与合成病房"""
