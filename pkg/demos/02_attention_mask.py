"""Visualize the prefix attention mask that makes one Transformer both
encode and generate: source rows see the whole source, summary rows grow
one column at a time.

Run: python3 demos/02_attention_mask.py
"""

from copysum import build_attention_mask

source_len, total_len = 4, 9
mask = build_attention_mask(source_len, total_len)

labels = [f"x{i}" for i in range(1, source_len + 1)] + [
    f"y{i}" for i in range(1, total_len - source_len + 1)
]
print(f"source length {source_len}, total length {total_len}")
print("     " + " ".join(f"{l:>3}" for l in labels))
for row_label, row in zip(labels, mask):
    cells = " ".join("  #" if v else "  ." for v in row)
    print(f"{row_label:>4} {cells}")

print("\n'#' marks an allowed attention edge.")
print("Rows x1..x4 are bidirectional over the source block;")
print("rows y1..y5 extend causally, one extra column per position.")
