"""Remote dataset fetching with caching, resume, and integrity checks.

The registry lists known downloadable archives by short name. Downloads go
to a local cache directory (override with the LIGHTTUNNEL_CACHE environment
variable) and are resumed with HTTP range requests when a partial file is
left behind. A cached file that passes the integrity checks is returned
without any network traffic.
"""

from __future__ import annotations

import os

import requests

from .exceptions import DatasetNotFoundError, IntegrityError, NetworkError

# Archive layout is defined by the external data repository; entries record
# whatever integrity information is published there (None = unknown).
REGISTRY = {
    "lt_crl_benchmark_v1": {
        "url": "https://causalchamber.s3.eu-central-1.amazonaws.com/"
               "downloadables/lt_crl_benchmark_v1.zip",
        "size": None,
        "sha256": None,
    },
}

_CHUNK = 1 << 16


def cache_dir(override=None) -> str:
    if override:
        return str(override)
    env = os.environ.get("LIGHTTUNNEL_CACHE")
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "lighttunnel")


def _verify(path: str, entry: dict) -> None:
    size = os.path.getsize(path)
    if size == 0:
        raise IntegrityError(f"{path} is empty")
    if entry.get("size") is not None and size != entry["size"]:
        raise IntegrityError(f"{path}: size {size} != expected {entry['size']}")
    if entry.get("sha256") is not None:
        import hashlib
        h = hashlib.sha256()
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        if h.hexdigest() != entry["sha256"]:
            raise IntegrityError(f"{path}: checksum {h.hexdigest()} != "
                                 f"expected {entry['sha256']}")


def fetch_remote(name: str, cache: str = None, registry: dict = None,
                 session=None) -> str:
    """Return a local path to the named archive, downloading if needed.

    A complete, verified file in the cache short-circuits all network I/O.
    A corrupt cached file raises IntegrityError and is removed, so the next
    call re-downloads it.
    """
    registry = REGISTRY if registry is None else registry
    if name not in registry:
        raise DatasetNotFoundError(f"unknown dataset {name!r}; known names: "
                                   f"{sorted(registry)}")
    entry = registry[name]
    directory = cache_dir(cache)
    os.makedirs(directory, exist_ok=True)
    final = os.path.join(directory, os.path.basename(entry["url"]))
    part = final + ".part"

    if os.path.exists(final):
        try:
            _verify(final, entry)
            return final
        except IntegrityError:
            os.remove(final)
            raise

    session = session or requests.Session()
    headers = {}
    mode = "wb"
    if os.path.exists(part) and os.path.getsize(part) > 0:
        headers["Range"] = f"bytes={os.path.getsize(part)}-"
        mode = "ab"
    try:
        with session.get(entry["url"], stream=True, headers=headers, timeout=60) as resp:
            if headers and resp.status_code == 200:
                mode = "wb"  # server ignored the range; restart
            elif resp.status_code not in (200, 206):
                raise NetworkError(f"GET {entry['url']} returned {resp.status_code}")
            with open(part, mode) as fh:
                for chunk in resp.iter_content(_CHUNK):
                    fh.write(chunk)
    except requests.RequestException as exc:
        raise NetworkError(f"download of {name} failed: {exc}") from exc

    _verify(part, entry)
    os.replace(part, final)
    return final
