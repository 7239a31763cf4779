"""
缓存工具模块 - 使用LRU缓存
"""
import hashlib
import json
from typing import Optional, Any
from functools import wraps
from cachetools import TTLCache
from app.config import settings


class LRUCacheWrapper:
    """LRU缓存包装器，支持TTL和大小限制"""

    def __init__(self, max_size: int = 64, ttl: int = 3600):
        """
        初始化缓存

        Args:
            max_size: 最大缓存条目数
            ttl: 缓存过期时间（秒）
        """
        # 使用TTLCache结合LRU策略
        self._cache = TTLCache(maxsize=max_size, ttl=ttl)

    def get(self, key: Any) -> Optional[Any]:
        """获取缓存"""
        if not settings.CACHE_ENABLED:
            return None
        return self._cache.get(key)

    def set(self, key: Any, value: Any):
        """设置缓存"""
        if not settings.CACHE_ENABLED:
            return
        # 缓存已满时LRU会自动淘汰最久未使用的项
        self._cache[key] = value

    def clear(self):
        """清空缓存"""
        self._cache.clear()

    def size(self) -> int:
        """获取当前缓存大小"""
        return len(self._cache)


# 全局缓存实例
cache = LRUCacheWrapper(
    max_size=settings.CACHE_MAX_SIZE,
    ttl=settings.CACHE_TTL
)


def cache_key_generator(*args, **kwargs) -> str:
    """生成缓存键（参数必须可 JSON 序列化）"""
    key_data = {
        "args": args,
        "kwargs": kwargs
    }
    key_str = json.dumps(key_data, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.md5(key_str.encode()).hexdigest()


def cached(func):
    """缓存装饰器（同步函数）"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        key = f"{func.__module__}.{func.__name__}:{cache_key_generator(*args, **kwargs)}"

        # 尝试从缓存获取
        cached_result = cache.get(key)
        if cached_result is not None:
            return cached_result

        result = func(*args, **kwargs)
        cache.set(key, result)
        return result
    return wrapper
