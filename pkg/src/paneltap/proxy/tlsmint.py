"""Research root credential and per-host leaf minting.

Participants install the research root during onboarding; the proxy then
mints a leaf for each intercepted host on demand. EC P-256 keys keep minting
fast enough to do per host at connection time. Upstream connections always
validate against a real trust store - interception never weakens the
participant-to-origin path.
"""

from __future__ import annotations

import datetime
import ipaddress
import ssl
import tempfile
import threading
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import ExtendedKeyUsageOID, NameOID

from ..errors import ConfigurationError

LEAF_VALIDITY = datetime.timedelta(days=90)
ROOT_VALIDITY = datetime.timedelta(days=365 * 5)


def _utcnow() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc)


def _key_pem(key) -> bytes:
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )


class CredentialAuthority:
    def __init__(self, root_cert: x509.Certificate, root_key):
        self.root_cert = root_cert
        self.root_key = root_key
        self._contexts: dict[str, ssl.SSLContext] = {}
        self._lock = threading.Lock()

    @classmethod
    def generate(cls, common_name: str = "Panel Research Observation Root") -> "CredentialAuthority":
        key = ec.generate_private_key(ec.SECP256R1())
        name = x509.Name(
            [
                x509.NameAttribute(NameOID.COMMON_NAME, common_name),
                x509.NameAttribute(NameOID.ORGANIZATION_NAME, "Research Panel Infrastructure"),
            ]
        )
        now = _utcnow()
        cert = (
            x509.CertificateBuilder()
            .subject_name(name)
            .issuer_name(name)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(minutes=5))
            .not_valid_after(now + ROOT_VALIDITY)
            .add_extension(x509.BasicConstraints(ca=True, path_length=0), critical=True)
            .add_extension(
                x509.KeyUsage(
                    digital_signature=True,
                    key_cert_sign=True,
                    crl_sign=True,
                    content_commitment=False,
                    key_encipherment=False,
                    data_encipherment=False,
                    key_agreement=False,
                    encipher_only=False,
                    decipher_only=False,
                ),
                critical=True,
            )
            .sign(key, hashes.SHA256())
        )
        return cls(root_cert=cert, root_key=key)

    @classmethod
    def load(cls, cert_file: str | Path, key_file: str | Path) -> "CredentialAuthority":
        try:
            cert = x509.load_pem_x509_certificate(Path(cert_file).read_bytes())
            key = serialization.load_pem_private_key(Path(key_file).read_bytes(), password=None)
        except FileNotFoundError as exc:
            raise ConfigurationError(f"research root credential missing: {exc.filename}") from None
        return cls(root_cert=cert, root_key=key)

    @classmethod
    def load_or_generate(cls, cert_file: str | Path, key_file: str | Path) -> "CredentialAuthority":
        cert_file, key_file = Path(cert_file), Path(key_file)
        if cert_file.exists() and key_file.exists():
            return cls.load(cert_file, key_file)
        authority = cls.generate()
        authority.save(cert_file, key_file)
        return authority

    def save(self, cert_file: str | Path, key_file: str | Path) -> None:
        cert_file, key_file = Path(cert_file), Path(key_file)
        cert_file.parent.mkdir(parents=True, exist_ok=True)
        key_file.parent.mkdir(parents=True, exist_ok=True)
        cert_file.write_bytes(self.root_cert.public_bytes(serialization.Encoding.PEM))
        key_file.write_bytes(_key_pem(self.root_key))
        key_file.chmod(0o600)

    @property
    def root_cert_pem(self) -> bytes:
        return self.root_cert.public_bytes(serialization.Encoding.PEM)

    def mint_leaf(self, host: str) -> tuple[bytes, bytes]:
        """(cert chain PEM, key PEM) for one host, signed by the root."""
        key = ec.generate_private_key(ec.SECP256R1())
        try:
            san: x509.GeneralName = x509.IPAddress(ipaddress.ip_address(host))
        except ValueError:
            san = x509.DNSName(host)
        now = _utcnow()
        cert = (
            x509.CertificateBuilder()
            .subject_name(x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, host)]))
            .issuer_name(self.root_cert.subject)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(minutes=5))
            .not_valid_after(now + LEAF_VALIDITY)
            .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
            .add_extension(x509.SubjectAlternativeName([san]), critical=False)
            .add_extension(
                x509.ExtendedKeyUsage([ExtendedKeyUsageOID.SERVER_AUTH]), critical=False
            )
            .sign(self.root_key, hashes.SHA256())
        )
        chain = cert.public_bytes(serialization.Encoding.PEM) + self.root_cert_pem
        return chain, _key_pem(key)

    def server_context(self, host: str) -> ssl.SSLContext:
        """TLS server context presenting a minted leaf for `host` (cached)."""
        with self._lock:
            context = self._contexts.get(host)
            if context is not None:
                return context
        chain, key = self.mint_leaf(host)
        context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        with tempfile.NamedTemporaryFile(suffix=".pem") as cert_tmp, tempfile.NamedTemporaryFile(
            suffix=".pem"
        ) as key_tmp:
            cert_tmp.write(chain)
            cert_tmp.flush()
            key_tmp.write(key)
            key_tmp.flush()
            context.load_cert_chain(cert_tmp.name, key_tmp.name)
        with self._lock:
            self._contexts[host] = context
        return context


def upstream_context(ca_file: str | Path | None) -> ssl.SSLContext:
    """Client-side context for origin connections: full validation, fail closed."""
    if ca_file is not None:
        context = ssl.create_default_context(cafile=str(ca_file))
    else:
        context = ssl.create_default_context()
    context.check_hostname = True
    context.verify_mode = ssl.CERT_REQUIRED
    return context
