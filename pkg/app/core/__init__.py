"""核心领域类型、病房时间线与增广似然"""
