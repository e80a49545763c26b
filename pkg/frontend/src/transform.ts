/**
 * Viewport math between slide space and screen space.
 *
 * Slide coordinates are level-0 pixels. The background image (when present)
 * is a downsampled rendering, so one image pixel covers `downsample` slide
 * pixels; `zoom` then scales image pixels onto the canvas and (panX, panY)
 * is the canvas position of slide origin.
 *
 *   screen = slide / downsample * zoom + pan
 */

export interface Viewport {
  panX: number;
  panY: number;
  zoom: number;
  downsample: number;
}

export interface Point {
  x: number;
  y: number;
}

/** Effective slide-pixel to screen-pixel scale factor. */
export function viewScale(vp: Viewport): number {
  return vp.zoom / vp.downsample;
}

export function slideToScreen(vp: Viewport, x: number, y: number): Point {
  const s = viewScale(vp);
  return { x: x * s + vp.panX, y: y * s + vp.panY };
}

export function screenToSlide(vp: Viewport, sx: number, sy: number): Point {
  const s = viewScale(vp);
  return { x: (sx - vp.panX) / s, y: (sy - vp.panY) / s };
}

/** Radius in screen pixels of a slide-space radius. */
export function radiusToScreen(vp: Viewport, r: number): number {
  return r * viewScale(vp);
}

/**
 * Zoom by `factor`, keeping the screen point (anchorX, anchorY) fixed on
 * the same slide location. Zoom is clamped to [0.02, 64].
 */
export function zoomAt(vp: Viewport, factor: number, anchorX: number, anchorY: number): Viewport {
  const zoom = Math.min(64, Math.max(0.02, vp.zoom * factor));
  const applied = zoom / vp.zoom;
  return {
    ...vp,
    zoom,
    panX: anchorX - (anchorX - vp.panX) * applied,
    panY: anchorY - (anchorY - vp.panY) * applied,
  };
}

export function panBy(vp: Viewport, dx: number, dy: number): Viewport {
  return { ...vp, panX: vp.panX + dx, panY: vp.panY + dy };
}

/** Viewport that fits a whole slide into a canvas with a small margin. */
export function fitSlide(
  slideWidth: number,
  slideHeight: number,
  canvasWidth: number,
  canvasHeight: number,
  downsample: number,
  margin = 20
): Viewport {
  const sx = (canvasWidth - 2 * margin) / slideWidth;
  const sy = (canvasHeight - 2 * margin) / slideHeight;
  const scale = Math.min(sx, sy);
  const zoom = scale * downsample;
  return {
    zoom,
    downsample,
    panX: (canvasWidth - slideWidth * scale) / 2,
    panY: (canvasHeight - slideHeight * scale) / 2,
  };
}
