"""Bearer-token authentication backed by static provider credentials.

Providers live in the gateway config; POST /auth/token exchanges a
credential for an expiring session token. Config may also pin static
tokens for scripting. The interface is intentionally small so real
deployments can swap in something stronger.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, field


@dataclass
class Authenticator:
    providers: dict[str, str] = field(default_factory=dict)  # id -> secret
    static_tokens: dict[str, str] = field(default_factory=dict)  # token -> id
    token_ttl: float = 24 * 3600.0

    def __post_init__(self) -> None:
        self._issued: dict[str, tuple[str, float]] = {}
        self._lock = threading.Lock()

    def issue(self, provider_id: str, secret: str) -> str | None:
        expected = self.providers.get(provider_id)
        if expected is None or not secrets.compare_digest(expected, secret):
            return None
        token = secrets.token_urlsafe(24)
        with self._lock:
            self._issued[token] = (provider_id, time.monotonic() + self.token_ttl)
        return token

    def principal(self, token: str) -> str | None:
        """Provider id for a valid token, else None (no detail leaks)."""
        if token in self.static_tokens:
            return self.static_tokens[token]
        with self._lock:
            entry = self._issued.get(token)
            if entry is None:
                return None
            provider_id, expires = entry
            if time.monotonic() > expires:
                del self._issued[token]
                return None
            return provider_id
