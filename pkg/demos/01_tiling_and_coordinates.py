"""Tiling a slide into half-overlapping patches and mapping detections back.

A 1024x1024 slide with 512-px patches at 0.5 overlap produces a 3x3 grid
with starts {0, 256, 512} on each axis; every interior pixel is covered by
exactly four patches, which is what protects objects sitting on tile
boundaries.
"""

from circlefuse import Circle, SlideGeometry, TilingConfig, generate_patches, to_slide_coords

slide = SlideGeometry("demo-slide", 1024, 1024)
patches = generate_patches(slide, TilingConfig(patch_size=512, overlap_fraction=0.5))

print(f"{len(patches)} patches over {slide.width}x{slide.height}:")
for p in patches:
    print(f"  {p.patch_id:>14}  origin=({p.x:4d},{p.y:4d})  size={p.w}x{p.h}")

# A detector finds a circle at (500, 500) radius 40 inside the patch whose
# origin is (256, 256). Slide-space position is a pure translation; the
# center is allowed to fall outside the patch bounds.
patch = next(p for p in patches if (p.x, p.y) == (256, 256))
local = Circle(500.0, 500.0, 40.0)
print(f"\nlocal {local} in patch {patch.patch_id} -> slide {to_slide_coords(patch, local)}")

# Edge clamping: a slide that is not a multiple of the stride gets its last
# patch shifted flush with the border instead of padded past it.
narrow = SlideGeometry("narrow", 300, 700)
print(f"\n{narrow.width}x{narrow.height} slide:")
for p in generate_patches(narrow, TilingConfig(512, 0.5)):
    print(f"  {p.patch_id:>14}  origin=({p.x},{p.y})  size={p.w}x{p.h}")
