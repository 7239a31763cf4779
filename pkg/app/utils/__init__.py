"""工具模块"""


