"""
支持 O(1) 插入、删除与均匀抽取的整数集合
"""
from typing import Dict, Iterable, List

import numpy as np


class IndexSet:
    """以“末尾交换删除”维护的整数集合，抽取顺序只取决于操作历史"""

    def __init__(self, items: Iterable[int] = ()):
        self._items: List[int] = []
        self._position: Dict[int, int] = {}
        for item in items:
            self.add(int(item))

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: int) -> bool:
        return item in self._position

    def __getitem__(self, index: int) -> int:
        return self._items[index]

    def add(self, item: int) -> None:
        if item in self._position:
            return
        self._position[item] = len(self._items)
        self._items.append(item)

    def remove(self, item: int) -> None:
        index = self._position.pop(item)
        last = self._items.pop()
        if index < len(self._items):
            self._items[index] = last
            self._position[last] = index

    def choice(self, rng: np.random.Generator) -> int:
        return self._items[int(rng.integers(len(self._items)))]
