import argparse
import logging
from pathlib import Path

from .export import ExportManifest, export_image_features, export_text_embeddings, load_phrases


def main() -> int:
    ap = argparse.ArgumentParser(prog="clip_export", description=__doc__)
    ap.add_argument("--model", default=ExportManifest.model)
    sub = ap.add_subparsers(dest="cmd", required=True)
    t = sub.add_parser("text", help="phrase list -> embedding table JSON")
    t.add_argument("--phrases", type=Path, required=True)
    t.add_argument("--out", type=Path, required=True)
    i = sub.add_parser("image", help="image -> per-pixel feature LEGF")
    i.add_argument("--image", type=Path, required=True)
    i.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    if args.cmd == "text":
        m = ExportManifest(model=args.model, phrase_source=args.phrases, table_out=args.out)
        export_text_embeddings(load_phrases(args.phrases), m)
    else:
        export_image_features(args.image, ExportManifest(model=args.model, grid_out=args.out))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
