"""From PDF bytes to rendered parses of PDF object dictionaries.

A small uncompressed PDF is generated with reportlab. Its top-level
"<< ... >>" dictionaries are pulled out syntactically and used as a training
corpus. The parser trains with the PDF preset, and a few held-out
dictionaries are written out as SVG diagrams.

    python3 demos/pdf_dictionaries.py --pages 60 --epochs 2 --out pdf_parses
"""

import argparse
import io
from pathlib import Path

from reportlab.pdfgen import canvas

from rlgrammar.config import preset
from rlgrammar.data import Corpus, extract_pdf_dictionaries, holdout_last
from rlgrammar.render import render_ascii, render_svg
from rlgrammar.trainer import Trainer

ap = argparse.ArgumentParser()
ap.add_argument("--pages", type=int, default=60)
ap.add_argument("--epochs", type=int, default=2)
ap.add_argument("--out", default="pdf_parses")
args = ap.parse_args()

buf = io.BytesIO()
pdf = canvas.Canvas(buf, pageCompression=0)
for i in range(args.pages):
    pdf.drawString(72, 720, f"page {i}")
    pdf.showPage()
pdf.save()

sentences = extract_pdf_dictionaries(buf.getvalue())
corpus = Corpus(sentences, holdout_last(len(sentences), "pdf"), {"dataset": "pdf"})
print(f"{len(sentences)} dictionaries, {sum(map(len, sentences))} characters, "
      f"{len(corpus.eval)} held out")
print("example:", repr(sentences[2][:80]))

trainer = Trainer(preset("pdf", epochs=args.epochs), corpus.train)
trainer.train(callback=lambda m: print(f"epoch {m.epoch + 1}: reward {m.mean_parse_reward:.3f}"))

out = Path(args.out)
out.mkdir(exist_ok=True)
parser = trainer.parser()
for i, d in enumerate(corpus.eval[:3]):
    tree = parser.parse(d).tree
    (out / f"dict_{i}.svg").write_text(render_svg(d, tree))
    print(render_ascii(d, tree))
print(f"SVG renderings written to {out}/")
