"""Straight-line scalar reference for the principled-BRDF evaluator.

Kept deliberately independent of the vectorized implementation in
src/: plain math-module arithmetic, one value at a time, no shared
helpers.  Conventions under test:

  * isotropic lobes only, no subsurface term, dielectric F0 from IOR 1.5
  * the returned value is reflectance * max(n.l, 0) (radiance under a
    unit directional light)
  * the albedo acts as an overall per-channel multiplier on the whole
    lobe sum (the same convention the measured-table mixing uses), so
    the evaluator is exactly degree-1 homogeneous in albedo; hue-tinted
    terms (specularTint, sheenTint) use the albedo hue normalized by
    its luminance.
"""

import math


def _schlick(u):
    m = min(max(1.0 - u, 0.0), 1.0)
    return m * m * m * m * m


def _gtr1(ndoth, a):
    if a >= 1.0:
        return 1.0 / math.pi
    a2 = a * a
    t = 1.0 + (a2 - 1.0) * ndoth * ndoth
    return (a2 - 1.0) / (math.pi * math.log(a2) * t)


def _gtr2(ndoth, a):
    a2 = a * a
    t = 1.0 + (a2 - 1.0) * ndoth * ndoth
    return a2 / (math.pi * t * t)


def _smith_g1(ndotv, alpha_g):
    a = alpha_g * alpha_g
    b = ndotv * ndotv
    return 1.0 / (ndotv + math.sqrt(a + b - a * b))


def reference_disney(n, l, v, albedo, metallic, specular, roughness,
                     specular_tint, sheen, sheen_tint, clearcoat,
                     clearcoat_roughness):
    """Cosine-weighted principled reflectance, one rgb tuple."""
    ndotl = n[0] * l[0] + n[1] * l[1] + n[2] * l[2]
    ndotv = n[0] * v[0] + n[1] * v[1] + n[2] * v[2]
    if ndotl <= 0.0 or ndotv <= 0.0:
        return (0.0, 0.0, 0.0)

    hx, hy, hz = l[0] + v[0], l[1] + v[1], l[2] + v[2]
    hn = math.sqrt(hx * hx + hy * hy + hz * hz)
    hx, hy, hz = hx / hn, hy / hn, hz / hn
    ndoth = n[0] * hx + n[1] * hy + n[2] * hz
    ldoth = l[0] * hx + l[1] * hy + l[2] * hz

    lum = 0.3 * albedo[0] + 0.6 * albedo[1] + 0.1 * albedo[2]
    if lum > 0.0:
        tint = (albedo[0] / lum, albedo[1] / lum, albedo[2] / lum)
    else:
        tint = (1.0, 1.0, 1.0)

    fl = _schlick(ndotl)
    fv = _schlick(ndotv)
    fh = _schlick(ldoth)

    # diffuse retro-reflection lobe
    fd90 = 0.5 + 2.0 * ldoth * ldoth * roughness
    fd = (1.0 + (fd90 - 1.0) * fl) * (1.0 + (fd90 - 1.0) * fv)
    diffuse = fd / math.pi

    # sheen, tinted toward the albedo hue
    sheen_rgb = tuple((1.0 - sheen_tint) + sheen_tint * tint[c] for c in range(3))
    sheen_term = tuple(fh * sheen * sheen_rgb[c] for c in range(3))

    # primary specular lobe: GTR2 distribution, remapped Smith shadowing
    alpha = max(1e-3, roughness * roughness)
    ds = _gtr2(ndoth, alpha)
    alpha_g = (0.5 + roughness / 2.0) ** 2
    gs = _smith_g1(ndotl, alpha_g) * _smith_g1(ndotv, alpha_g)
    f0 = tuple(
        (1.0 - metallic) * 0.08 * specular
        * ((1.0 - specular_tint) + specular_tint * tint[c])
        + metallic
        for c in range(3)
    )
    fs = tuple(f0[c] + (1.0 - f0[c]) * fh for c in range(3))
    spec_term = tuple(gs * ds * fs[c] for c in range(3))

    # clearcoat lobe: GTR1 distribution, fixed 0.25 Smith roughness, F0=0.04
    alpha_cc = 0.001 + 0.099 * clearcoat_roughness
    dr = _gtr1(ndoth, alpha_cc)
    fr = 0.04 + 0.96 * fh
    gr = _smith_g1(ndotl, 0.25) * _smith_g1(ndotv, 0.25)
    cc_term = 0.25 * clearcoat * gr * fr * dr

    out = []
    for c in range(3):
        lobe = (diffuse + sheen_term[c]) * (1.0 - metallic) + spec_term[c] + cc_term
        out.append(albedo[c] * lobe * ndotl)
    return tuple(out)
