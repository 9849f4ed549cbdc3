"""
Client for the memcached text protocol over TCP (asyncio streams).

Values are stored with flags 0 and exptime 0: revision counters and cached
results never expire by TTL, only by eviction.
"""

import asyncio
import logging
from typing import Dict, List, Optional, Tuple

from app.cache.base import CacheBackend, validate_key
from app.core.exceptions import CacheBackendError, CacheNumericError

logger = logging.getLogger(__name__)

CRLF = b"\r\n"


def parse_addr(addr: str, default_port: int = 11211) -> Tuple[str, int]:
    """Split ``HOST:PORT``."""
    host, sep, port = addr.rpartition(":")
    if not sep:
        return addr, default_port
    if not port.isdigit():
        raise ValueError(f"invalid port in address {addr!r}")
    return host or "127.0.0.1", int(port)


class MemcachedCache(CacheBackend):
    """One connection per client; requests are serialized on it."""

    def __init__(self, host: str = "127.0.0.1", port: int = 11211, timeout_s: float = 2.0, name: str = "memcached"):
        super().__init__(name)
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        self._reader: Optional[asyncio.StreamReader] = None
        self._writer: Optional[asyncio.StreamWriter] = None
        self._lock: Optional[asyncio.Lock] = None

    @classmethod
    def from_addr(cls, addr: str, timeout_s: float = 2.0, name: str = "memcached") -> "MemcachedCache":
        host, port = parse_addr(addr)
        return cls(host, port, timeout_s=timeout_s, name=name)

    async def connect(self) -> None:
        if self._writer is not None:
            return
        try:
            self._reader, self._writer = await asyncio.wait_for(
                asyncio.open_connection(self.host, self.port), self.timeout_s
            )
        except (OSError, asyncio.TimeoutError) as e:
            raise CacheBackendError(f"cannot connect to memcached at {self.host}:{self.port}: {e}") from e
        logger.debug("connected to memcached at %s:%s", self.host, self.port)

    async def close(self) -> None:
        writer, self._reader, self._writer = self._writer, None, None
        if writer is not None:
            writer.close()
            try:
                await writer.wait_closed()
            except OSError:
                pass

    async def _request(self, payload: bytes, handler):
        """Send one command and parse its reply with ``handler(reader)``."""
        if self._lock is None:
            self._lock = asyncio.Lock()
        async with self._lock:
            await self.connect()
            try:
                self._writer.write(payload)
                await self._writer.drain()
                return await asyncio.wait_for(handler(self._reader), self.timeout_s)
            except (OSError, asyncio.TimeoutError, asyncio.IncompleteReadError, asyncio.LimitOverrunError) as e:
                await self.close()
                raise CacheBackendError(f"memcached I/O error: {e!r}") from e
            except CacheBackendError:
                # Part of the reply may still be unread
                await self.close()
                raise

    @staticmethod
    async def _readline(reader: asyncio.StreamReader) -> bytes:
        line = await reader.readuntil(CRLF)
        return line[:-2]

    @staticmethod
    def _raise_for_error(line: bytes) -> None:
        if line == b"ERROR" or line.startswith(b"SERVER_ERROR") or line.startswith(b"CLIENT_ERROR"):
            raise CacheBackendError(f"memcached replied {line.decode(errors='replace')}")

    async def _read_values(self, reader: asyncio.StreamReader) -> Dict[str, bytes]:
        values: Dict[str, bytes] = {}
        while True:
            line = await self._readline(reader)
            if line == b"END":
                return values
            self._raise_for_error(line)
            parts = line.split()
            if len(parts) < 4 or parts[0] != b"VALUE":
                raise CacheBackendError(f"unexpected get reply {line!r}")
            try:
                size = int(parts[3])
                key = parts[1].decode("utf-8")
            except (ValueError, UnicodeDecodeError) as e:
                raise CacheBackendError(f"malformed get reply {line!r}") from e
            data = await reader.readexactly(size + 2)
            values[key] = data[:-2]

    async def _get(self, key: str) -> Optional[bytes]:
        return (await self._multiget([key]))[0]

    async def _multiget(self, keys: List[str]) -> List[Optional[bytes]]:
        unique = list(dict.fromkeys(keys))
        payload = b"get " + b" ".join(validate_key(k) for k in unique) + CRLF
        values = await self._request(payload, self._read_values)
        return [values.get(k) for k in keys]

    async def _store(self, command: bytes, key: str, value: bytes) -> bool:
        header = b"%s %s 0 0 %d" % (command, validate_key(key), len(value))

        async def handler(reader):
            line = await self._readline(reader)
            if line == b"STORED":
                return True
            if line == b"NOT_STORED":
                return False
            self._raise_for_error(line)
            raise CacheBackendError(f"unexpected {command.decode()} reply {line!r}")

        return await self._request(header + CRLF + value + CRLF, handler)

    async def _set(self, key: str, value: bytes) -> None:
        await self._store(b"set", key, value)

    async def _add(self, key: str, value: bytes) -> bool:
        return await self._store(b"add", key, value)

    async def _increment(self, key: str) -> Optional[int]:
        async def handler(reader):
            line = await self._readline(reader)
            if line == b"NOT_FOUND":
                return None
            if line.startswith(b"CLIENT_ERROR") and b"non-numeric" in line:
                raise CacheNumericError(line.decode(errors="replace"))
            self._raise_for_error(line)
            if not line.isdigit():
                raise CacheBackendError(f"unexpected incr reply {line!r}")
            return int(line)

        return await self._request(b"incr " + validate_key(key) + b" 1" + CRLF, handler)

    async def _delete(self, key: str) -> bool:
        async def handler(reader):
            line = await self._readline(reader)
            if line == b"DELETED":
                return True
            if line == b"NOT_FOUND":
                return False
            self._raise_for_error(line)
            raise CacheBackendError(f"unexpected delete reply {line!r}")

        return await self._request(b"delete " + validate_key(key) + CRLF, handler)

    async def _flush(self) -> None:
        async def handler(reader):
            line = await self._readline(reader)
            self._raise_for_error(line)
            if line != b"OK":
                raise CacheBackendError(f"unexpected flush_all reply {line!r}")

        await self._request(b"flush_all" + CRLF, handler)
