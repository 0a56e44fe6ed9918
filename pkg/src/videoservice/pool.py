"""Pooled image memory with explicit map/copy accounting.

The pool emulates the DMABUF-style buffer flow of a camera/encoder
pipeline: producers and consumers exchange buffers as a
``(handle, offset)`` integer pair and attach zero-copy views onto the
shared region.  The only operation that moves bytes out of the pool is
:meth:`BufferPool.copy_out`, so the pool's ``copies`` counter is a
direct measurement of how often image data was actually duplicated.

Slots carry a generation counter so that a stale lease (released, or
surviving across a slot reuse) raises :class:`LeaseLifetimeError`
instead of silently aliasing someone else's frame.
"""

import threading
from dataclasses import dataclass

from .errors import ConfigurationError, LeaseLifetimeError, PoolExhaustedError

# handles start away from 0 so they read like descriptors, not indices
_HANDLE_BASE = 64


@dataclass(frozen=True)
class BufferLease:
    """Handle to one leased region of pool memory."""

    handle: int
    offset: int
    length: int
    generation: int

    def export(self):
        """Region identity as a ``(handle, offset)`` integer pair."""
        return (self.handle, self.offset)


@dataclass(frozen=True)
class PoolStats:
    copies: int
    maps: int
    live: int
    capacity: int


class _Slot:
    __slots__ = ("index", "handle", "offset", "length", "generation", "live")

    def __init__(self, index, handle, offset):
        self.index = index
        self.handle = handle
        self.offset = offset
        self.length = 0
        self.generation = 0
        self.live = False


class BufferPool:
    """Fixed-capacity pool of equally sized buffers in one shared region."""

    def __init__(self, capacity: int, buffer_size: int):
        if capacity < 1 or buffer_size < 1:
            raise ConfigurationError(
                f"pool needs capacity >= 1 and buffer_size >= 1, "
                f"got {capacity}, {buffer_size}"
            )
        self.capacity = capacity
        self.buffer_size = buffer_size
        self._region = bytearray(capacity * buffer_size)
        self._zeros = bytes(buffer_size)
        self._slots = [
            _Slot(i, _HANDLE_BASE + i, i * buffer_size) for i in range(capacity)
        ]
        self._by_handle = {s.handle: s for s in self._slots}
        self._free = list(reversed(self._slots))
        self._lock = threading.Lock()
        self._copies = 0
        self._maps = 0

    def acquire(self, length: int) -> BufferLease:
        """Lease a zero-initialized region of ``length`` bytes."""
        if length < 0 or length > self.buffer_size:
            raise ConfigurationError(
                f"requested {length} bytes, pool buffers hold at most "
                f"{self.buffer_size}"
            )
        with self._lock:
            if not self._free:
                raise PoolExhaustedError(
                    f"all {self.capacity} pool buffers are leased"
                )
            slot = self._free.pop()
            slot.live = True
            slot.generation += 1
            slot.length = length
            self._region[slot.offset:slot.offset + length] = \
                memoryview(self._zeros)[:length]
            return BufferLease(slot.handle, slot.offset, length, slot.generation)

    def _slot_for(self, lease: BufferLease) -> _Slot:
        slot = self._by_handle.get(lease.handle)
        if slot is None or not slot.live or slot.generation != lease.generation:
            raise LeaseLifetimeError(
                f"lease (handle={lease.handle}, offset={lease.offset}, "
                f"generation={lease.generation}) does not name a live region"
            )
        return slot

    def map_view(self, lease: BufferLease) -> memoryview:
        """Attach a read/write view aliasing the leased region (no copy)."""
        with self._lock:
            slot = self._slot_for(lease)
            self._maps += 1
            view = memoryview(self._region)
            return view[slot.offset:slot.offset + lease.length]

    def export(self, lease: BufferLease):
        """Validate the lease and return its ``(handle, offset)`` pair."""
        with self._lock:
            self._slot_for(lease)
        return lease.export()

    def import_region(self, handle: int, offset: int) -> BufferLease:
        """Second lease aliasing the region named by an exported pair."""
        with self._lock:
            slot = self._by_handle.get(handle)
            if slot is None or not slot.live or slot.offset != offset:
                raise LeaseLifetimeError(
                    f"(handle={handle}, offset={offset}) does not name a "
                    f"live region"
                )
            return BufferLease(slot.handle, slot.offset, slot.length,
                               slot.generation)

    def copy_out(self, lease: BufferLease, sink, *, start: int = 0,
                 length: int = None) -> int:
        """Copy (a sub-range of) the region into ``sink``.

        This is the single pool operation that duplicates bytes; every
        call increments ``copies`` by exactly one, even for an empty
        sub-range (the operation is counted, not the bytes).
        """
        with self._lock:
            slot = self._slot_for(lease)
            if length is None:
                length = lease.length - start
            if start < 0 or length < 0 or start + length > lease.length:
                raise ConfigurationError(
                    f"sub-range [{start}, {start + length}) outside lease "
                    f"of {lease.length} bytes"
                )
            data = bytes(
                self._region[slot.offset + start:slot.offset + start + length]
            )
            self._copies += 1
        sink.write(data)
        return length

    def release(self, lease: BufferLease):
        with self._lock:
            slot = self._slot_for(lease)
            slot.live = False
            slot.length = 0
            self._free.append(slot)

    def stats(self) -> PoolStats:
        with self._lock:
            live = self.capacity - len(self._free)
            return PoolStats(self._copies, self._maps, live, self.capacity)
