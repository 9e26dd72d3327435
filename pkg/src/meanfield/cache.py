"""
Band-state cache keyed by exact fractional k.

The in-memory map is shared between threads: the first stored result for a
k-point wins and later duplicates are discarded. The optional disk file lets
separate CLI invocations reuse solved k-points.

File layout (little endian):
    header  b"CCDFSEBC", uint32 version, uint32 n_bands, uint32 basis size, uint32 n_pw,
            32-byte SHA-256 fingerprint of the system (ModelSystem.fingerprint)
    record  3 x (int64 numerator, int64 denominator),
            n_bands float64 energies,
            basis size x n_bands complex128 coefficients (band-major)
"""

import logging
import struct
import threading
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from ..lattice import KPoint, ReciprocalCell
from .states import BandStates

logger = logging.getLogger(__name__)

MAGIC = b"CCDFSEBC"
FORMAT_VERSION = 2
_HEADER = struct.Struct('<8sIIII32s')
_KEY = struct.Struct('<6q')

Key = Tuple[Fraction, Fraction, Fraction]


class BandCache:
    """Thread-safe map from folded k-points to BandStates."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self._entries: Dict[Key, BandStates] = {}
        self._lock = threading.Lock()
        self._dirty = False

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, k: KPoint) -> Optional[BandStates]:
        return self._entries.get(k.fractional)

    def put(self, states: BandStates) -> BandStates:
        """Publish states; returns whichever entry ends up stored."""
        with self._lock:
            existing = self._entries.get(states.k.fractional)
            if existing is not None:
                return existing
            self._entries[states.k.fractional] = states
            self._dirty = True
            return states

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def load(self, reciprocal: ReciprocalCell, n_bands: int, n_pw: int, fingerprint: bytes) -> int:
        """
        Read entries from the cache file if it was written for the same system.

        Returns:
            Number of entries loaded
        """
        if self.path is None or not self.path.exists():
            return 0
        basis_size = n_pw ** 3
        try:
            raw = self.path.read_bytes()
            magic, version, file_bands, file_basis, file_npw, file_fingerprint = _HEADER.unpack_from(raw, 0)
            if magic != MAGIC or version != FORMAT_VERSION:
                logger.warning(f"Ignoring band cache {self.path}: unrecognised header")
                return 0
            if (file_bands, file_basis, file_npw) != (n_bands, basis_size, n_pw):
                logger.warning(f"Ignoring band cache {self.path}: basis or band count differs")
                return 0
            if file_fingerprint != fingerprint:
                logger.warning(f"Ignoring band cache {self.path}: written for a different system")
                return 0
            offset = _HEADER.size
            record_size = _KEY.size + 8 * n_bands + 16 * basis_size * n_bands
            loaded = 0
            while offset + record_size <= len(raw):
                nums = _KEY.unpack_from(raw, offset)
                offset += _KEY.size
                frac = [Fraction(nums[2 * i], nums[2 * i + 1]) for i in range(3)]
                energies = np.frombuffer(raw, dtype='<f8', count=n_bands, offset=offset)
                offset += 8 * n_bands
                coefficients = np.frombuffer(raw, dtype='<c16', count=basis_size * n_bands, offset=offset)
                offset += 16 * basis_size * n_bands
                states = BandStates(
                    KPoint.from_fractional(frac, reciprocal),
                    energies,
                    coefficients.reshape(n_bands, basis_size).T,
                )
                self.put(states)
                loaded += 1
            self._dirty = False
            logger.info(f"Loaded {loaded} band states from {self.path}")
            return loaded
        except Exception as e:
            logger.warning(f"Failed to read band cache {self.path}: {str(e)}")
            return 0

    def save(self, n_pw: int, fingerprint: bytes) -> None:
        """Write all entries to the cache file (no-op without a path)."""
        if self.path is None or not self._dirty:
            return
        with self._lock:
            entries = sorted(self._entries.items())
        if not entries:
            return
        n_bands = entries[0][1].n_bands
        basis_size = n_pw ** 3
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, 'wb') as f:
                f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n_bands, basis_size, n_pw, fingerprint))
                for key, states in entries:
                    nums = []
                    for value in key:
                        nums.extend([value.numerator, value.denominator])
                    f.write(_KEY.pack(*nums))
                    f.write(np.ascontiguousarray(states.energies, dtype='<f8').tobytes())
                    f.write(np.ascontiguousarray(states.coefficients.T, dtype='<c16').tobytes())
            self._dirty = False
            logger.info(f"Wrote {len(entries)} band states to {self.path}")
        except Exception as e:
            logger.warning(f"Failed to write band cache {self.path}: {str(e)}")
