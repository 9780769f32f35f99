"""Train a tiny BPE vocabulary and watch it merge, encode, and round-trip.

Run: python3 demos/01_tokenizer.py
"""

from copysum import train_bpe

corpus = [
    "the lower court case was the lowest point",
    "lower and lower went the newest numbers",
    "the newest lowest widest case",
    "numbers ran in and on again in the main run",
]

vocab = train_bpe(corpus, target_size=64)

print(f"learned {len(vocab)} tokens via {len(vocab.merges)} merges")
print("first ten merges:")
for left, right in vocab.merges[:10]:
    print(f"  {left!r} + {right!r} -> {(left + right)!r}")

text = "The LOWEST numbers in the case"
ids = vocab.encode(text)
print(f"\nencode({text!r})")
print("  ids   :", ids)
print("  pieces:", [vocab.id_to_token[i] for i in ids])
print("  decode:", repr(vocab.decode(ids)))

# round trip equals the normalized (uncased, space-collapsed) input
assert vocab.decode(ids) == "the lowest numbers in the case"
print("\nround trip on normalized text: exact")
