"""Writes the golden BEVC / BVWT files with struct, independent of the C++ encoder."""
import struct
from pathlib import Path

here = Path(__file__).parent

# Embeddings: dim 3, ids 5 and 2.
ids = [5, 2]
rows = [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]]
emb = b"BEVC" + struct.pack("<HIQ", 1, 3, len(ids))
emb += b"".join(struct.pack("<Q", i) for i in ids)
emb += b"".join(struct.pack("<3f", *r) for r in rows)
(here / "golden_embeddings.bevc").write_bytes(emb)

# Weights: "head.bias" (2,) and "head.weight" (2, 3).
tensors = [
    ("head.bias", [2], [0.5, -1.25]),
    ("head.weight", [2, 3], [1.0, 2.0, 3.0, -4.0, 0.25, 0.0]),
]
w = b"BVWT" + struct.pack("<HI", 1, len(tensors))
for name, dims, data in tensors:
    raw = name.encode("utf-8")
    w += struct.pack("<H", len(raw)) + raw
    w += struct.pack("<B", len(dims)) + b"".join(struct.pack("<I", d) for d in dims)
    w += struct.pack(f"<{len(data)}f", *data)
(here / "golden_weights.bvwt").write_bytes(w)
