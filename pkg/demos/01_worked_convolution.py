"""Walk through the convolution arithmetic the classifier is built on.

Convolves the worked 5x5 feature map with a 3x3 filter at stride 1 and
stride 2, then chains the output-dimension formula through the full
material-classifier architecture to show where the 25,088-element
flatten vector and the 13.1M parameter budget come from.
"""

import numpy as np

from specklecut import nn
from specklecut.zoo import ch3_material

A = np.array([[5, 1, 17, 8, 5],
              [5, 23, 5, 11, 5],
              [5, 5, 5, 5, 5],
              [8, 7, 24, 16, 8],
              [2, 3, 0, 4, 48]], dtype=np.float64)
F = np.array([[-1, 1, 0],
              [0, 1, 0],
              [-1, 1, 0]], dtype=np.float64)


def conv(stride):
    layer = nn.ConvLayerSpec(filters=1, kernel=(3, 3),
                             weights=F.reshape(3, 3, 1, 1),
                             bias=np.zeros(1), stride=(stride, stride))
    return nn.conv2d_forward(A[:, :, None], layer)[:, :, 0]


def main():
    print("input feature map:")
    print(A.astype(int))
    print("\nfilter:")
    print(F.astype(int))

    out1 = conv(1)
    print(f"\nstride 1, no padding -> {out1.shape[0]}x{out1.shape[1]} output:")
    print(out1.astype(int))
    print(f"second element: {out1[0, 1]:.0f}")

    out2 = conv(2)
    print(f"\nstride 2, no padding -> {out2.shape[0]}x{out2.shape[1]} output:")
    print(out2.astype(int))
    print(f"second element: {out2[0, 1]:.0f}")

    print("\noutput-dim formula on a 256x256 input, 3x3 kernel:",
          nn.conv_output_dims(256, 256, 3, 3, 0, 1, 1))

    net = ch3_material(30, 256)
    print("\nmaterial classifier shape chain (input 256x256x1):")
    names = [type(l).__name__.replace("LayerSpec", "").replace("Spec", "")
             for l in net.layers]
    for name, shape in zip(names, nn.layer_output_shapes(net)):
        print(f"  {name:<8} -> {shape}")
    print(f"total parameters (30-class head): {nn.count_parameters(net):,}")
    print(f"total parameters (59-class head): "
          f"{nn.count_parameters(ch3_material(59, 256)):,}")


if __name__ == "__main__":
    main()
