"""
性能管理器
负责工作线程数、有序并行执行与计时
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


class PerformanceManager:
    """并行与计时配置管理器"""

    THREADS_ENV = "QRE_THREADS"

    def __init__(self, default_workers: Optional[int] = None):
        """
        初始化性能管理器

        Args:
            default_workers: 未设置环境变量时的默认线程数，缺省为 min(4, CPU 数)
        """
        self.default_workers = default_workers or min(4, os.cpu_count() or 1)

    def worker_count(self) -> int:
        """读取 QRE_THREADS 限制的线程数"""
        raw = os.environ.get(self.THREADS_ENV)
        if raw is None or raw.strip() == "":
            return self.default_workers
        try:
            n = int(raw)
        except ValueError:
            logger.warning("[性能配置] %s=%r 不是整数，已忽略", self.THREADS_ENV, raw)
            return self.default_workers
        if n < 1:
            logger.warning("[性能配置] %s=%d 必须为正整数，已忽略", self.THREADS_ENV, n)
            return self.default_workers
        return n

    def map_ordered(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """并行执行相互独立的任务，结果按输入顺序返回"""
        items = list(items)
        workers = min(self.worker_count(), len(items))
        if workers <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))

    def start_timer(self) -> float:
        """开始计时"""
        return time.perf_counter()

    def end_timer(self, start_time: float, operation: str = "操作") -> float:
        """结束计时并返回耗时"""
        elapsed = time.perf_counter() - start_time
        logger.info("[性能监控] %s耗时: %.3f秒", operation, elapsed)
        return elapsed


# 全局性能管理器实例
performance_manager = PerformanceManager()


def get_performance_manager() -> PerformanceManager:
    """获取全局性能管理器实例"""
    return performance_manager
