"""模型比较与拟合优度评估"""
