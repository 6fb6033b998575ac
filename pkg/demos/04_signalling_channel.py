"""Sending bits through a homogeneous Wharton ensemble.

Alice picks one of two orthogonal axes per bit; Bob keeps his axis fixed and
reads the bit from the mean of his own outcomes.  The quantum and Born-family
sources are rejected up front because Bob's marginal does not move.
"""
from bell_hv_lab.estimators import stream
from bell_hv_lab.models import QuantumCorrelated, WhartonPair
from bell_hv_lab.signalling import NoChannelError, ProtocolConfig, channel_sweep, random_bits, run_protocol

config = ProtocolConfig(WhartonPair.homogeneous("Aplus"), pairs_per_bit=200)
print("expected Bob means for bits 0/1:", config.expected_marginals())

message = random_bits(64, stream(0, "demo-message"))
report = run_protocol(config, message, seed=7)
print(f"sent    {report.sent_bits}\ndecoded {report.decoded_bits}")
print(f"BER {report.ber} (per-bit Hoeffding bound {report.hoeffding_ber_bound:.2e})")

for src in (QuantumCorrelated(), WhartonPair.born_family(0.3)):
    try:
        run_protocol(ProtocolConfig(src), "01", seed=0)
    except NoChannelError as exc:
        print(f"{src.model}: {exc}")

print("\nN, mean BER over 20 trials, bound")
rows = channel_sweep(config, [1, 2, 5, 10, 20, 50], trials=20, seed=1)
for n in sorted({r.N for r in rows}):
    sel = [r for r in rows if r.N == n]
    print(f"{n:>4}  {sum(r.ber_empirical for r in sel) / len(sel):.4f}  {sel[0].ber_bound:.4f}")
