// Bundled example documents. GENERATED by scripts/gen_presets.py from
// the Python package presets; run that script after changing them.

import type { GraphDocument, TrainSettings } from "./types.js";

export const MLP_PRESET_TEXT =
  "{\n  \"format_version\": \"capsforge/1\",\n  \"metadata\": {\n    \"name\": \"mlp-2-6-4-2\",\n    \"seed\": 0\n  },\n  \"capsules\": [\n    {\n      \"id\": \"a\",\n      \"kind\": \"data_1d\",\n      \"attributes\": {\n        \"dimension\": 2,\n        \"dtype\": \"float64\"\n      }\n    },\n    {\n      \"id\": \"b\",\n      \"kind\": \"relu_1d\",\n      \"attributes\": {\n        \"dimension\": 6,\n        \"dtype\": \"float64\"\n      }\n    },\n    {\n      \"id\": \"c\",\n      \"kind\": \"relu_1d\",\n      \"attributes\": {\n        \"dimension\": 4,\n        \"dtype\": \"float64\"\n      }\n    },\n    {\n      \"id\": \"d\",\n      \"kind\": \"identity_1d\",\n      \"attributes\": {\n        \"dimension\": 2,\n        \"dtype\": \"float64\"\n      }\n    }\n  ],\n  \"connections\": [\n    {\n      \"tail\": \"a\",\n      \"head\": \"b\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 6\n      }\n    },\n    {\n      \"tail\": \"b\",\n      \"head\": \"c\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 4\n      }\n    },\n    {\n      \"tail\": \"c\",\n      \"head\": \"d\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 2\n      }\n    }\n  ]\n}\n";

export const MLP_PRESET = JSON.parse(MLP_PRESET_TEXT) as GraphDocument;

export const LENET_PRESET_TEXT =
  "{\n  \"format_version\": \"capsforge/1\",\n  \"metadata\": {\n    \"name\": \"lenet-28x28\",\n    \"seed\": 0\n  },\n  \"capsules\": [\n    {\n      \"id\": \"a\",\n      \"kind\": \"data_2d\",\n      \"attributes\": {\n        \"channels\": 1,\n        \"dtype\": \"float64\",\n        \"height\": 28,\n        \"width\": 28\n      }\n    },\n    {\n      \"id\": \"b\",\n      \"kind\": \"relu_2d\",\n      \"attributes\": {\n        \"channels\": 32,\n        \"dtype\": \"float64\",\n        \"height\": 24,\n        \"width\": 24\n      }\n    },\n    {\n      \"id\": \"c\",\n      \"kind\": \"maxpool_2d\",\n      \"attributes\": {\n        \"channels\": 32,\n        \"dtype\": \"float64\",\n        \"height\": 24,\n        \"width\": 24,\n        \"window\": [\n          2,\n          2\n        ]\n      }\n    },\n    {\n      \"id\": \"d\",\n      \"kind\": \"relu_2d\",\n      \"attributes\": {\n        \"channels\": 16,\n        \"dtype\": \"float64\",\n        \"height\": 8,\n        \"width\": 8\n      }\n    },\n    {\n      \"id\": \"e\",\n      \"kind\": \"maxpool_2d\",\n      \"attributes\": {\n        \"channels\": 16,\n        \"dtype\": \"float64\",\n        \"height\": 8,\n        \"width\": 8,\n        \"window\": [\n          2,\n          2\n        ]\n      }\n    },\n    {\n      \"id\": \"f\",\n      \"kind\": \"identity_1d\",\n      \"attributes\": {\n        \"dimension\": 256,\n        \"dtype\": \"float64\"\n      }\n    },\n    {\n      \"id\": \"g\",\n      \"kind\": \"relu_1d\",\n      \"attributes\": {\n        \"dimension\": 128,\n        \"dtype\": \"float64\"\n      }\n    },\n    {\n      \"id\": \"h\",\n      \"kind\": \"softmax_1d\",\n      \"attributes\": {\n        \"dimension\": 10,\n        \"dtype\": \"float64\"\n      }\n    }\n  ],\n  \"connections\": [\n    {\n      \"tail\": \"a\",\n      \"head\": \"b\",\n      \"kind\": \"convolutional\",\n      \"attributes\": {\n        \"kernel_height\": 5,\n        \"kernel_width\": 5,\n        \"kernels\": 32,\n        \"stride\": 1\n      }\n    },\n    {\n      \"tail\": \"b\",\n      \"head\": \"c\",\n      \"kind\": \"transfer\"\n    },\n    {\n      \"tail\": \"c\",\n      \"head\": \"d\",\n      \"kind\": \"convolutional\",\n      \"attributes\": {\n        \"kernel_height\": 5,\n        \"kernel_width\": 5,\n        \"kernels\": 16,\n        \"stride\": 1\n      }\n    },\n    {\n      \"tail\": \"d\",\n      \"head\": \"e\",\n      \"kind\": \"transfer\"\n    },\n    {\n      \"tail\": \"e\",\n      \"head\": \"f\",\n      \"kind\": \"reshaping\"\n    },\n    {\n      \"tail\": \"f\",\n      \"head\": \"g\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 128\n      }\n    },\n    {\n      \"tail\": \"g\",\n      \"head\": \"h\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 10\n      }\n    }\n  ]\n}\n";

export const LENET_PRESET = JSON.parse(LENET_PRESET_TEXT) as GraphDocument;

export const SKIP_PRESET_TEXT =
  "{\n  \"format_version\": \"capsforge/1\",\n  \"metadata\": {\n    \"name\": \"skip-demo\",\n    \"seed\": 0\n  },\n  \"capsules\": [\n    {\n      \"id\": \"a\",\n      \"kind\": \"data_1d\",\n      \"attributes\": {\n        \"dimension\": 3,\n        \"dtype\": \"float64\"\n      }\n    },\n    {\n      \"id\": \"b\",\n      \"kind\": \"relu_1d\",\n      \"attributes\": {\n        \"dimension\": 4,\n        \"dtype\": \"float64\"\n      }\n    },\n    {\n      \"id\": \"c\",\n      \"kind\": \"relu_1d\",\n      \"attributes\": {\n        \"dimension\": 4,\n        \"dtype\": \"float64\"\n      }\n    },\n    {\n      \"id\": \"d\",\n      \"kind\": \"identity_1d\",\n      \"attributes\": {\n        \"dimension\": 2,\n        \"dtype\": \"float64\"\n      }\n    }\n  ],\n  \"connections\": [\n    {\n      \"tail\": \"a\",\n      \"head\": \"b\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 4\n      }\n    },\n    {\n      \"tail\": \"b\",\n      \"head\": \"c\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 4\n      }\n    },\n    {\n      \"tail\": \"a\",\n      \"head\": \"c\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 4\n      }\n    },\n    {\n      \"tail\": \"c\",\n      \"head\": \"d\",\n      \"kind\": \"full\",\n      \"attributes\": {\n        \"height\": 2\n      }\n    }\n  ]\n}\n";

export const SKIP_PRESET = JSON.parse(SKIP_PRESET_TEXT) as GraphDocument;

export const XOR_CSV =
  "0.0,0.0,1.0,0.0\n0.0,1.0,0.0,1.0\n1.0,0.0,0.0,1.0\n1.0,1.0,1.0,0.0\n";

export const XOR_TRAIN_SETTINGS: TrainSettings = {"learning_rate": 0.1, "max_iter": 2000, "loss": "sse", "seed": 0};

export const PRESETS: { name: string; label: string; text: string }[] = [
  { name: "xor_mlp", label: "MLP 2-6-4-2 (XOR demo)", text: MLP_PRESET_TEXT },
  { name: "lenet_mnist", label: "LeNet 28x28", text: LENET_PRESET_TEXT },
  { name: "skip_demo", label: "Skip connections", text: SKIP_PRESET_TEXT },
];
