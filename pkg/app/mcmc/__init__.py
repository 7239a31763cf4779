"""MCMC 采样器"""
