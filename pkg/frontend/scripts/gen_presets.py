#!/usr/bin/env python3
"""Regenerate src/presets.ts from the Python package's bundled presets.

Run from the frontend directory: python3 scripts/gen_presets.py
Keeping the frontend copies byte-identical to the package presets is what
makes the editor round-trip tests meaningful.
"""

import json
import pathlib

from capsforge import presets

OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "presets.ts"

names = {"xor_mlp": "MLP_PRESET", "lenet_mnist": "LENET_PRESET",
         "skip_demo": "SKIP_PRESET"}

out = ['// Bundled example documents. GENERATED by scripts/gen_presets.py from',
       '// the Python package presets; run that script after changing them.',
       '', 'import type { GraphDocument, TrainSettings } from "./types.js";', '']
for name, var in names.items():
    text = presets.text(name)
    out.append(f"export const {var}_TEXT =")
    out.append("  " + json.dumps(text) + ";")
    out.append("")
    out.append(f"export const {var} = JSON.parse({var}_TEXT) as GraphDocument;")
    out.append("")
out.append("export const XOR_CSV =")
out.append("  " + json.dumps(presets.xor_csv()) + ";")
out.append("")
cfg = presets.XOR_TRAIN_CONFIG
out.append("export const XOR_TRAIN_SETTINGS: TrainSettings = "
           + json.dumps({"learning_rate": cfg["learning_rate"],
                         "max_iter": cfg["max_iter"], "loss": cfg["loss"],
                         "seed": cfg["seed"]}) + ";")
out.append("")
out.append('export const PRESETS: { name: string; label: string; text: string }[] = [')
out.append('  { name: "xor_mlp", label: "MLP 2-6-4-2 (XOR demo)", text: MLP_PRESET_TEXT },')
out.append('  { name: "lenet_mnist", label: "LeNet 28x28", text: LENET_PRESET_TEXT },')
out.append('  { name: "skip_demo", label: "Skip connections", text: SKIP_PRESET_TEXT },')
out.append('];')
out.append('')
OUT.write_text("\n".join(out))
print(f"wrote {OUT}")
