"""输入数据解析与 WardData 构建"""
