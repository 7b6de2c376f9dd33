# This demo illustrates how frequency bands separate a textured object
# from a smooth one.

import favs

for texture in ("checkerboard", "smooth"):
    # Generate a synthetic scene
    scene = favs.gen_scene(42, texture=texture)

    # Split the frames into four frequency bands
    spectrum = favs.spectral.fft2(scene.frames)
    bands = favs.residual_decompose(spectrum, favs.ThresholdLadder())

    # Report the share of energy in each band
    energies = bands.energies()
    total = sum(energies.values())
    shares = ", ".join(f"{name} {e / total:.1%}" for name, e in energies.items())
    print(f"{texture}: {shares}")
