from __future__ import annotations

import ssl
import tempfile

import pytest

from paneltap.app import ProxyStack, Runtime
from paneltap.config import Config, ProxyConfig, RetentionConfig, TlsConfig
from paneltap.keys import generate_key_file
from paneltap.labkit import FixtureOrigin
from paneltap.proxy.tlsmint import CredentialAuthority
from paneltap.registry import ApprovalState, WhitelistEntry, advance_stage, default_taxonomy

NOTICE_TEXT = (
    "Study privacy notice\n"
    "\n"
    "With your explicit permission, your visits to the approved study websites\n"
    "are copied for analysis. Sensitive data such as passwords, payment details\n"
    "and private messages are removed before anything is stored; your identity\n"
    "is replaced with a coded token; records are encrypted and deleted after\n"
    "the retention period. You can withdraw at any time, effective immediately.\n"
)

APPROVAL_PATH = [
    ("submitted", "researcher"),
    ("approved_by_pis", "pi"),
    ("approved_by_partner", "partner"),
    ("included", "working_group"),
    ("participants_informed", "working_group"),
]


def approved_state(author: str = "r.tester") -> ApprovalState:
    state = ApprovalState(author=author)
    for stage, role in APPROVAL_PATH:
        state = advance_stage(state, stage, role)
    return state


def build_entry(url: str, category_id: str, **kw) -> WhitelistEntry:
    defaults = dict(
        reason=f"Observes personalization on {url} for the study's research questions.",
        approval=approved_state(),
    )
    defaults.update(kw)
    return WhitelistEntry(url=url, category_id=category_id, **defaults)


def standard_entries() -> list[WhitelistEntry]:
    news = build_entry(
        "news.example",
        "news",
        aliases=("www.news.example",),
        uses_tls=True,
        has_private_comms=True,
        private_comms_paths=("/inbox", "/messages"),
        sensitive_flags=frozenset({"email"}),
        flag_paths={"email": ("/letters",)},
        measures="Email addresses are redacted by the global address pattern.",
    )
    shop = build_entry(
        "shop.example",
        "webshops",
        sensitive_flags=frozenset({"financial", "credentials"}),
        flag_paths={"financial": ("site-wide",), "credentials": ("/account",)},
        measures="Card and account numbers are redacted; credential fields are dropped.",
    )
    search = build_entry("search.example", "search-engines")
    expired = build_entry("expired.example", "news", uses_tls=True)
    return [news, shop, search, expired]


def political_entry() -> WhitelistEntry:
    """Fully populated justification: a party site with third-party data in
    its comment sections and declared sensitive content pages."""
    return build_entry(
        "party.example",
        "political-parties",
        aliases=("www.party.example",),
        uses_tls=True,
        has_private_comms=True,
        private_comms_paths=("/members/chat",),
        has_third_party_data=True,
        sensitive_flags=frozenset({"sensitive-personal"}),
        flag_paths={"sensitive-personal": ("site-wide",)},
        measures=(
            "Site content reveals political opinions: records carry only the coded"
            " participant token, and commenter names in the discussion sections are"
            " dropped by an entry-scoped field rule."
        ),
    )


def make_config(tmp_path, **overrides) -> Config:
    data_dir = tmp_path / "data"
    keys_dir = tmp_path / "keys"
    storage_key = keys_dir / "storage.key"
    pseudonym_key = keys_dir / "pseudonym.key"
    generate_key_file(storage_key)
    generate_key_file(pseudonym_key)
    notice_file = tmp_path / "notice.txt"
    notice_file.write_text(NOTICE_TEXT)
    identity_dir = tmp_path / "identity"
    defaults = dict(
        data_dir=data_dir,
        proxy=ProxyConfig(listen=("127.0.0.1", 0)),
        admin_listen=("127.0.0.1", 0),
        tls=TlsConfig(),
        storage_key_file=storage_key,
        pseudonym_key_file=pseudonym_key,
        identity_dir=identity_dir,
        retention=RetentionConfig(),
        notice_file=notice_file,
        correspondence_paths=("/inbox", "/messages"),
    )
    defaults.update(overrides)
    return Config(**defaults)


@pytest.fixture
def config(tmp_path) -> Config:
    return make_config(tmp_path)


@pytest.fixture
def runtime(config) -> Runtime:
    return Runtime(config)


@pytest.fixture
def published_runtime(runtime) -> Runtime:
    runtime.snapshots.publish(standard_entries(), default_taxonomy())
    return runtime


@pytest.fixture(scope="session")
def research_authority() -> CredentialAuthority:
    return CredentialAuthority.generate()


@pytest.fixture(scope="session")
def origin_authority() -> CredentialAuthority:
    return CredentialAuthority.generate("Fixture Origin Root")


class Lab:
    """A running deployment against fixture origins."""

    def __init__(self, runtime, stack, origin, tls_origin, origin_ca_file, research_ca_file):
        self.runtime = runtime
        self.stack = stack
        self.origin = origin
        self.tls_origin = tls_origin
        self.origin_ca_file = origin_ca_file
        self.research_ca_file = research_ca_file
        self.proxy_addr = stack.proxy.bound_addr
        self.admin_addr = stack.admin._server.server_address

    @property
    def gatekeeper(self):
        return self.runtime.gatekeeper

    @property
    def store(self):
        return self.runtime.store

    @property
    def metrics(self):
        return self.runtime.metrics

    def consent(self, participant: str, version: int | None = None):
        version = version or self.runtime.snapshots.latest_version()
        return self.gatekeeper.grant_consent(
            participant, version, self.gatekeeper.notice_hash, True
        )

    def drain(self):
        self.stack.worker.drain()


@pytest.fixture
def lab(tmp_path, research_authority, origin_authority):
    """Full stack: plain + TLS fixture origins, proxy, pipeline, admin API."""
    origin = FixtureOrigin()
    origin_addr = origin.start()

    def tls_fixture_origin(hosts, expired=False) -> FixtureOrigin:
        server_ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        chain, key = _origin_leaf(origin_authority, hosts, expired=expired)
        with tempfile.NamedTemporaryFile(suffix=".pem") as cert_tmp, tempfile.NamedTemporaryFile(
            suffix=".pem"
        ) as key_tmp:
            cert_tmp.write(chain)
            cert_tmp.flush()
            key_tmp.write(key)
            key_tmp.flush()
            server_ctx.load_cert_chain(cert_tmp.name, key_tmp.name)
        return FixtureOrigin(tls_context=server_ctx)

    tls_origin = tls_fixture_origin(["news.example", "www.news.example", "party.example"])
    tls_origin_addr = tls_origin.start()
    expired_origin = tls_fixture_origin(["expired.example"], expired=True)
    expired_origin_addr = expired_origin.start()

    origin_ca_file = tmp_path / "origin-ca.pem"
    origin_ca_file.write_bytes(origin_authority.root_cert_pem)
    research_ca_file = tmp_path / "research-ca.pem"
    research_ca_file.write_bytes(research_authority.root_cert_pem)

    resolve = {
        "news.example": tls_origin_addr,
        "www.news.example": tls_origin_addr,
        "party.example": tls_origin_addr,
        "shop.example": origin_addr,
        "search.example": origin_addr,
        "expired.example": expired_origin_addr,
    }
    # Non-whitelisted fixture hosts route to the plain origin too.
    for i in range(60):
        resolve[f"unlisted-{i:03d}.example"] = origin_addr

    config = make_config(
        tmp_path,
        proxy=ProxyConfig(listen=("127.0.0.1", 0), resolve=resolve, max_stored_body=256 * 1024),
        tls=TlsConfig(upstream_ca_file=origin_ca_file),
    )
    runtime = Runtime(config)
    runtime.snapshots.publish(standard_entries(), default_taxonomy())

    stack = ProxyStack(runtime)
    stack.authority = research_authority
    stack.proxy.authority = research_authority
    stack.start()
    lab = Lab(runtime, stack, origin, tls_origin, origin_ca_file, research_ca_file)
    try:
        yield lab
    finally:
        stack.stop()
        origin.stop()
        tls_origin.stop()
        expired_origin.stop()


def _origin_leaf(
    authority: CredentialAuthority, hosts: list[str], expired: bool = False
) -> tuple[bytes, bytes]:
    import datetime

    from cryptography import x509
    from cryptography.hazmat.primitives import hashes, serialization
    from cryptography.hazmat.primitives.asymmetric import ec
    from cryptography.x509.oid import ExtendedKeyUsageOID, NameOID

    key = ec.generate_private_key(ec.SECP256R1())
    now = datetime.datetime.now(datetime.timezone.utc)
    if expired:
        not_before = now - datetime.timedelta(days=30)
        not_after = now - datetime.timedelta(days=1)
    else:
        not_before = now - datetime.timedelta(minutes=5)
        not_after = now + datetime.timedelta(days=30)
    cert = (
        x509.CertificateBuilder()
        .subject_name(x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, hosts[0])]))
        .issuer_name(authority.root_cert.subject)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(not_before)
        .not_valid_after(not_after)
        .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
        .add_extension(
            x509.SubjectAlternativeName([x509.DNSName(host) for host in hosts]), critical=False
        )
        .add_extension(x509.ExtendedKeyUsage([ExtendedKeyUsageOID.SERVER_AUTH]), critical=False)
        .sign(authority.root_key, hashes.SHA256())
    )
    chain = cert.public_bytes(serialization.Encoding.PEM) + authority.root_cert_pem
    key_pem = key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )
    return chain, key_pem
