// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nuigo/image.hpp"

namespace nuigo {

// CIE L* of one sRGB triple (IEC 61966-2-1 linearization, D65 2-degree
// observer), rescaled from [0,100] to [0,1].
double srgb_lightness(double r, double g, double b);

// Lightness channel of a whole image. Rejects non-finite or out-of-range
// pixels with a ValidationError.
Plane rgb_to_luminance(const Image& img);

}  // namespace nuigo
