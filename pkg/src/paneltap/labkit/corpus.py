"""Synthetic traffic corpus with planted sensitive sentinels.

The corpus is constructed, so perfect recall is assertable: every plant is
recorded in a manifest and the stored records can be scanned for survivors.
Card plants are checksum-valid by construction (the suite validates them
against its own independent checksum before trusting the corpus).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

SENTINEL_KINDS = (
    "card_plain",
    "card_spaced",
    "card_dashed",
    "email",
    "password_field",
    "auth_header",
)


@dataclass(frozen=True)
class Sentinel:
    kind: str
    value: str  # exact string planted, as it appears on the wire


@dataclass
class RequestSpec:
    host: str
    path: str
    method: str = "GET"
    scheme: str = "http"
    headers: list[tuple[str, str]] = field(default_factory=list)
    body: bytes = b""
    whitelisted: bool = True
    sentinels: list[Sentinel] = field(default_factory=list)

    @property
    def url(self) -> str:
        return f"{self.scheme}://{self.host}{self.path}"


def luhn_checksum_digit(partial: str) -> str:
    """Digit that makes `partial + digit` pass the mod-10 check."""
    total = 0
    for position, char in enumerate(reversed(partial)):
        value = int(char)
        if position % 2 == 0:  # positions counted with the check digit appended
            value *= 2
            if value > 9:
                value -= 9
        total += value
    return str((10 - total % 10) % 10)


def make_card_number(rng: random.Random, length: int = 16) -> str:
    partial = "4" + "".join(rng.choice("0123456789") for _ in range(length - 2))
    return partial + luhn_checksum_digit(partial)


def group_digits(digits: str, separator: str, group: int = 4) -> str:
    return separator.join(digits[i : i + group] for i in range(0, len(digits), group))


def make_sentinel(rng: random.Random, kind: str, index: int) -> Sentinel:
    if kind == "card_plain":
        return Sentinel(kind, make_card_number(rng, rng.choice((13, 16, 19))))
    if kind == "card_spaced":
        return Sentinel(kind, group_digits(make_card_number(rng, 16), " "))
    if kind == "card_dashed":
        return Sentinel(kind, group_digits(make_card_number(rng, 16), "-"))
    if kind == "email":
        return Sentinel(kind, f"plant{index}.{rng.randrange(10**8):08d}@sentinel-corpus.example")
    if kind == "password_field":
        return Sentinel(kind, f"pw-sentinel-{index}-{rng.randrange(10**8):08d}")
    if kind == "auth_header":
        return Sentinel(kind, f"Bearer sentinel-token-{index}-{rng.randrange(10**8):08d}")
    raise ValueError(f"unknown sentinel kind {kind!r}")


def sentinel_requests(seed: int, total: int, host: str) -> tuple[list[RequestSpec], list[Sentinel]]:
    """`total` sentinels spread over request specs against a whitelisted host.

    Cards and emails travel in request bodies POSTed to /echo, so the origin
    reflects them into the response direction too; passwords go into form
    posts (the origin never echoes those); auth headers ride as headers.
    """
    rng = random.Random(seed)
    specs: list[RequestSpec] = []
    manifest: list[Sentinel] = []
    for index in range(total):
        kind = SENTINEL_KINDS[index % len(SENTINEL_KINDS)]
        sentinel = make_sentinel(rng, kind, index)
        manifest.append(sentinel)
        if kind == "password_field":
            body = f"username=member{index}&password={sentinel.value}&remember=yes".encode()
            specs.append(
                RequestSpec(
                    host=host,
                    path="/form",
                    method="POST",
                    headers=[("Content-Type", "application/x-www-form-urlencoded")],
                    body=body,
                    sentinels=[sentinel],
                )
            )
        elif kind == "auth_header":
            specs.append(
                RequestSpec(
                    host=host,
                    path=f"/doc/{index}",
                    headers=[("Authorization", sentinel.value)],
                    sentinels=[sentinel],
                )
            )
        else:
            filler = f"comment {index}: my details follow {sentinel.value} end of message"
            specs.append(
                RequestSpec(
                    host=host,
                    path="/echo",
                    method="POST",
                    headers=[("Content-Type", "text/plain")],
                    body=filler.encode(),
                    sentinels=[sentinel],
                )
            )
    return specs, manifest


def mixed_traffic(
    seed: int, whitelisted_host: str, n_whitelisted: int, n_other: int
) -> list[RequestSpec]:
    """Minimization corpus: whitelisted requests plus distinctively named
    non-whitelisted hosts whose URLs must never appear in any log or store."""
    rng = random.Random(seed)
    specs = [
        RequestSpec(host=whitelisted_host, path=f"/doc/w{i}", whitelisted=True)
        for i in range(n_whitelisted)
    ]
    for i in range(n_other):
        host = f"never-list-{i:04d}-{rng.randrange(10**6):06d}.example"
        specs.append(RequestSpec(host=host, path=f"/doc/x{i}", whitelisted=False))
    return specs
