/** Minimal binary netpbm (P5/P6) decoder for rendering chips to canvas. */

export interface DecodedImage {
  width: number;
  height: number;
  channels: 1 | 3;
  pixels: Uint8Array;
}

export function decodeNetpbm(buffer: ArrayBuffer): DecodedImage {
  const bytes = new Uint8Array(buffer);
  let pos = 0;

  function token(): string {
    while (pos < bytes.length && isSpace(bytes[pos]!)) {
      pos += 1;
    }
    const start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos]!)) {
      pos += 1;
    }
    if (start === pos) {
      throw new Error("truncated netpbm header");
    }
    return String.fromCharCode(...bytes.slice(start, pos));
  }

  const magic = token();
  const channels = magic === "P5" ? 1 : magic === "P6" ? 3 : null;
  if (channels === null) {
    throw new Error(`unsupported netpbm magic ${magic}`);
  }
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0)) {
    throw new Error("bad netpbm dimensions");
  }
  if (maxval !== 255) {
    throw new Error(`unsupported netpbm maxval ${maxval}`);
  }
  pos += 1; // single whitespace byte after maxval
  const expected = width * height * channels;
  const raster = bytes.slice(pos, pos + expected);
  if (raster.length !== expected) {
    throw new Error("truncated netpbm raster");
  }
  return { width, height, channels, pixels: raster };
}

/** Expand to RGBA suitable for ImageData. */
export function toRgba(image: DecodedImage): Uint8ClampedArray<ArrayBuffer> {
  const { width, height, channels, pixels } = image;
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i += 1) {
    const r = pixels[i * channels]!;
    const g = channels === 3 ? pixels[i * 3 + 1]! : r;
    const b = channels === 3 ? pixels[i * 3 + 2]! : r;
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = 255;
  }
  return out;
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x0a || byte === 0x0d || byte === 0x09;
}
