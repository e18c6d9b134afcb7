import { describe, expect, it } from "vitest";

import { decodeNetpbm, toRgba } from "../src/pgm.js";

function bytes(...parts: (string | number[])[]): ArrayBuffer {
  const chunks: number[] = [];
  for (const part of parts) {
    if (typeof part === "string") {
      for (const ch of part) {
        chunks.push(ch.charCodeAt(0));
      }
    } else {
      chunks.push(...part);
    }
  }
  return new Uint8Array(chunks).buffer;
}

describe("decodeNetpbm", () => {
  it("decodes P5 grayscale", () => {
    const buffer = bytes("P5\n2 2\n255\n", [0, 128, 255, 64]);
    const image = decodeNetpbm(buffer);
    expect(image.width).toBe(2);
    expect(image.height).toBe(2);
    expect(image.channels).toBe(1);
    expect([...image.pixels]).toEqual([0, 128, 255, 64]);
  });

  it("decodes P6 color", () => {
    const buffer = bytes("P6\n1 2\n255\n", [10, 20, 30, 40, 50, 60]);
    const image = decodeNetpbm(buffer);
    expect(image.channels).toBe(3);
    expect([...image.pixels]).toEqual([10, 20, 30, 40, 50, 60]);
  });

  it("handles multi-whitespace headers", () => {
    const buffer = bytes("P5\n2\n1\n255\n", [7, 9]);
    const image = decodeNetpbm(buffer);
    expect(image.width).toBe(2);
    expect(image.height).toBe(1);
  });

  it("rejects unknown magic", () => {
    expect(() => decodeNetpbm(bytes("P3\n1 1\n255\n", [0]))).toThrow(/magic/);
  });

  it("rejects truncated raster", () => {
    expect(() => decodeNetpbm(bytes("P5\n4 4\n255\n", [1, 2]))).toThrow(/truncated/);
  });

  it("rejects non-255 maxval", () => {
    expect(() => decodeNetpbm(bytes("P5\n1 1\n65535\n", [0, 0]))).toThrow(/maxval/);
  });
});

describe("toRgba", () => {
  it("replicates gray into rgb and sets alpha", () => {
    const rgba = toRgba({
      width: 2, height: 1, channels: 1, pixels: new Uint8Array([10, 200]),
    });
    expect([...rgba]).toEqual([10, 10, 10, 255, 200, 200, 200, 255]);
  });

  it("passes color channels through", () => {
    const rgba = toRgba({
      width: 1, height: 1, channels: 3, pixels: new Uint8Array([1, 2, 3]),
    });
    expect([...rgba]).toEqual([1, 2, 3, 255]);
  });
});
