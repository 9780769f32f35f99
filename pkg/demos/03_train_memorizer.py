"""Train the smallest interesting summarizer: memorize a handful of pairs,
then greedily decode them back.

Run: python3 demos/03_train_memorizer.py  (about ten seconds on CPU)
"""

import numpy as np

from copysum import (
    ModelConfig,
    PrefixLM,
    SearchConfig,
    TrainConfig,
    TrainingExample,
    beam_search,
    sampling_preset,
    train,
    train_bpe,
)
from copysum.decoding import hypothesis_text, make_model_scorer

rng = np.random.default_rng(0)
lexicon = ["bad", "keg", "lim", "fad", "gem", "kid", "mab", "del"]
pairs = []
for _ in range(40):
    words = [lexicon[i] for i in rng.integers(0, len(lexicon), 6)]
    pairs.append((" ".join(words), " ".join(words[1:4])))

vocab = train_bpe([f"{s} {t}" for s, t in pairs], target_size=160)
examples = [TrainingExample.from_texts(vocab, s, t) for s, t in pairs]

model = PrefixLM(
    ModelConfig(
        num_layers=2, hidden_size=32, num_heads=4,
        vocab_size=len(vocab), max_positions=64, feed_forward_size=64,
    ),
    seed=1,
)
report = train(
    model, examples, [], sampling_preset("all-summary"),
    TrainConfig(epochs=25, batch_size=8, lr=3e-3, seed=0), vocab,
)
for row in report.records[::6]:
    print(f"epoch {row['epoch']:>2}  loss {row['loss_mean']:.3f}")

print("\ngreedy decode vs expected:")
config = SearchConfig(
    end_id=vocab.end_id, k=1, answer_pool_size=1, max_summary_len=16,
    banned_ids=tuple(sorted(set(vocab.special_ids) - {vocab.end_id})),
)
correct = 0
for source, summary in pairs[:8]:
    scorer = make_model_scorer(model, vocab, vocab.encode(source))
    pool, _ = beam_search(scorer, config)
    decoded = hypothesis_text(vocab, pool[0]) if pool else "(nothing)"
    flag = "ok " if decoded == summary else "MISS"
    correct += decoded == summary
    print(f"  [{flag}] {source}  ->  {decoded}")
print(f"{correct}/8 exact")
