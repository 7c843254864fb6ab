"""Block-partitioned products on a ring of workers.

Worker ``k`` keeps column block ``k`` of the dense operand resident and
starts with row block ``k`` of the left factor. At every step it multiplies
the left block it currently holds against its resident columns, then passes
that block to worker ``k - 1`` and receives the next one from ``k + 1``
(indices mod ``P``). After ``P`` steps each worker owns the full column
block ``k`` of the product, and only the (sparse) left factor has moved.

Workers are threads exchanging blocks through FIFO channels. The transport
is the :class:`Channel` protocol, so a process-based backend can replace it.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import scipy.sparse as sp

from .linalg import DenseData


@dataclass(frozen=True)
class BlockPartition:
    """``P`` contiguous blocks over ``[0, size)`` with sizes differing by at most one."""

    P: int
    boundaries: tuple[int, ...]

    def __post_init__(self):
        b = self.boundaries
        if len(b) != self.P + 1 or b[0] != 0 or any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError(f"invalid boundaries {b} for P={self.P}")

    @classmethod
    def even(cls, size: int, P: int) -> "BlockPartition":
        if size < 1 or P < 1:
            raise ValueError(f"need size >= 1 and P >= 1, got {size}, {P}")
        P = min(P, size)
        q, r = divmod(size, P)
        cuts = [0]
        for k in range(P):
            cuts.append(cuts[-1] + q + (1 if k < r else 0))
        return cls(P, tuple(cuts))

    @property
    def size(self) -> int:
        return self.boundaries[-1]

    def block(self, k: int) -> tuple[int, int]:
        return self.boundaries[k], self.boundaries[k + 1]


class Channel(Protocol):
    def send(self, item) -> None: ...

    def recv(self): ...


class QueueChannel:
    def __init__(self):
        self._q = queue.Queue()

    def send(self, item):
        self._q.put(item)

    def recv(self):
        return self._q.get()


class WorkerFailure(RuntimeError):
    pass


_ABORT = object()


@dataclass
class RingProduct:
    """Column-partitioned product; ``blocks[k]`` was assembled by worker ``k``."""

    blocks: list[np.ndarray]
    column_partition: BlockPartition
    sends: list[int]
    bytes_sent: list[int]

    @property
    def values(self) -> np.ndarray:
        return np.hstack(self.blocks)


def _payload_bytes(block) -> int:
    if sp.issparse(block):
        return int(block.data.nbytes + block.indices.nbytes + block.indptr.nbytes)
    return int(np.asarray(block).nbytes)


def ring_multiply(left, operand: np.ndarray, partition: BlockPartition,
                  channel_factory=QueueChannel) -> RingProduct:
    """Compute ``left @ operand`` with the ring schedule.

    ``partition`` fixes the worker count; rows of ``left`` and columns of
    ``operand`` are each split evenly into ``P`` blocks, where ``P`` is
    reduced if either dimension is smaller.
    """
    operand = np.asarray(operand)
    if left.shape[1] != operand.shape[0]:
        raise ValueError(f"dimension mismatch: {left.shape} @ {operand.shape}")
    P = min(partition.P, left.shape[0], operand.shape[1])
    rows = (partition if partition.P == P and partition.size == left.shape[0]
            else BlockPartition.even(left.shape[0], P))
    cols = BlockPartition.even(operand.shape[1], P)
    if sp.issparse(left):
        left = sp.csr_array(left)

    row_blocks = [left[slice(*rows.block(k))] for k in range(P)]
    col_blocks = [np.ascontiguousarray(operand[:, slice(*cols.block(k))]) for k in range(P)]
    inbox = [channel_factory() for _ in range(P)]
    results: list[list | None] = [None] * P
    sends = [0] * P
    nbytes = [0] * P
    errors: list[BaseException] = []
    failed = threading.Event()

    def worker(k):
        try:
            idx, held = k, row_blocks[k]
            out = [None] * P
            for j in range(P):
                out[idx] = np.asarray(held @ col_blocks[k])
                if j == P - 1:
                    break
                inbox[(k - 1) % P].send((idx, held))
                sends[k] += 1
                nbytes[k] += _payload_bytes(held)
                msg = inbox[k].recv()
                if msg is _ABORT:
                    return
                idx, held = msg
            results[k] = out
        except BaseException as exc:
            errors.append(exc)
            failed.set()
            for ch in inbox:
                ch.send(_ABORT)

    if P == 1:
        worker(0)
    else:
        threads = [threading.Thread(target=worker, args=(k,), daemon=True) for k in range(P)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if errors or failed.is_set():
        raise WorkerFailure("ring multiply failed") from (errors[0] if errors else None)

    blocks = [np.vstack(results[k]) for k in range(P)]
    return RingProduct(blocks, cols, sends, nbytes)


def two_step_gradient(omega, data: DenseData, partition: BlockPartition) -> RingProduct:
    """``(Omega X^T) X / n`` as two ring products, never forming ``S``."""
    if omega.shape != (data.p, data.p):
        raise ValueError(f"omega shape {omega.shape} does not match p={data.p}")
    x = data.values
    y = ring_multiply(omega, np.ascontiguousarray(x.T), partition).values
    out = ring_multiply(y, x, partition)
    out.blocks = [b / data.n for b in out.blocks]
    return out
