#!/usr/bin/env python3
# Copyright 2026 The fliqs Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the bundled layer manifests (ImageNet 224x224 input)."""

import json
import pathlib


def conv(name, hw_out, cin, cout, k, groups=1):
    return {"name": name, "macs": hw_out * hw_out * cout * (cin // groups) * k * k,
            "searchable": True}


def resnet18():
    layers = [conv("conv1", 112, 3, 64, 7)]
    hw, cin = 56, 64
    for stage, cout in enumerate([64, 128, 256, 512], start=1):
        for block in range(2):
            stride = 2 if (stage > 1 and block == 0) else 1
            out_hw = hw // stride
            prefix = f"layer{stage}.{block}"
            layers.append(conv(f"{prefix}.conv1", out_hw, cin, cout, 3))
            layers.append(conv(f"{prefix}.conv2", out_hw, cout, cout, 3))
            if stride != 1 or cin != cout:
                layers.append(conv(f"{prefix}.downsample", out_hw, cin, cout, 1))
            hw, cin = out_hw, cout
    layers.append({"name": "fc", "macs": 512 * 1000, "searchable": True})
    return {"model_name": "resnet18", "layers": layers}


def mobilenetv2():
    layers = [conv("features.0", 112, 3, 32, 3)]
    settings = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2),
                (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]
    hw, cin, idx = 112, 32, 1
    for t, c, n, s in settings:
        for i in range(n):
            stride = s if i == 0 else 1
            hidden = cin * t
            out_hw = hw // stride
            prefix = f"features.{idx}"
            if t != 1:
                layers.append(conv(f"{prefix}.expand", hw, cin, hidden, 1))
            layers.append(conv(f"{prefix}.depthwise", out_hw, hidden, hidden, 3, groups=hidden))
            layers.append(conv(f"{prefix}.project", out_hw, hidden, c, 1))
            hw, cin, idx = out_hw, c, idx + 1
    layers.append(conv(f"features.{idx}", hw, cin, 1280, 1))
    layers.append({"name": "classifier", "macs": 1280 * 1000, "searchable": True})
    return {"model_name": "mobilenetv2_1.0", "layers": layers}


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "manifests"
    out.mkdir(parents=True, exist_ok=True)
    for fn, manifest in (("resnet18.json", resnet18()), ("mobilenetv2.json", mobilenetv2())):
        total = sum(l["macs"] for l in manifest["layers"])
        (out / fn).write_text(json.dumps(manifest, indent=2) + "\n")
        print(f"{fn}: {len(manifest['layers'])} layers, {total} MACs, "
              f"BF16 {total * 256 / 1e9:.2f} INT8 {total * 64 / 1e9:.2f} INT4 {total * 16 / 1e9:.3f} GBOPs")


if __name__ == "__main__":
    main()
