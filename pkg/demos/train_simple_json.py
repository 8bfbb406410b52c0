"""Train a parser on the Simple-JSON grammar and look at what it learned.

The corpus is 128 random sentences of S -> '{' ('a' | 'b' | 'c' | S+) '}';
the last 8 are held out. Training uses the dataset preset. A full 200-epoch
run takes a few minutes on one core, and --epochs shortens it.

    python3 demos/train_simple_json.py --epochs 40 --seed 2
"""

import argparse

from rlgrammar.config import preset
from rlgrammar.data import gen_simple_json
from rlgrammar.evaluate import evaluate
from rlgrammar.render import render_ascii
from rlgrammar.trainer import Trainer

ap = argparse.ArgumentParser()
ap.add_argument("--epochs", type=int, default=200)
ap.add_argument("--seed", type=int, default=0, help="seeds both the corpus and the networks")
args = ap.parse_args()

corpus = gen_simple_json(128, seed=args.seed)
trainer = Trainer(preset("simple-json", seed=args.seed, epochs=args.epochs), corpus.train)


def progress(m):
    if m.epoch % 10 == 9 or m.epoch == args.epochs - 1:
        print(f"epoch {m.epoch + 1:3d}: critic loss {m.critic_loss:8.3f}  "
              f"mean parse reward {m.mean_parse_reward:7.3f}  atom types {m.atom_types}")


trainer.train(callback=progress)
parser = trainer.parser()
print("\ngreedy parses of the held-out sentences:\n")
for s in corpus.eval:
    print(render_ascii(s, parser.parse(s).tree))
print(evaluate(parser, corpus.eval).text())
