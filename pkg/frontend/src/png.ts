// Minimal 8-bit grayscale PNG encoder. Emits a valid zlib stream built from
// stored (uncompressed) deflate blocks so no compression library is needed
// in the browser. Output is readable by any standards-compliant decoder.

const SIGNATURE = new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const typed = new Uint8Array(4 + data.length);
  for (let i = 0; i < 4; i++) typed[i] = type.charCodeAt(i);
  typed.set(data, 4);
  const out = new Uint8Array(4 + typed.length + 4);
  out.set(u32be(data.length), 0);
  out.set(typed, 4);
  out.set(u32be(crc32(typed)), 4 + typed.length);
  return out;
}

// zlib wrapper around stored deflate blocks: 2-byte header, blocks of at
// most 65535 bytes (LEN/NLEN little-endian), big-endian adler32 trailer.
function zlibStored(raw: Uint8Array): Uint8Array {
  const blocks = Math.max(1, Math.ceil(raw.length / 65535));
  const out = new Uint8Array(2 + blocks * 5 + raw.length + 4);
  out[0] = 0x78;
  out[1] = 0x01;
  let pos = 2;
  for (let i = 0; i < blocks; i++) {
    const start = i * 65535;
    const part = raw.subarray(start, Math.min(start + 65535, raw.length));
    out[pos++] = i === blocks - 1 ? 1 : 0;
    out[pos++] = part.length & 0xff;
    out[pos++] = (part.length >>> 8) & 0xff;
    out[pos++] = ~part.length & 0xff;
    out[pos++] = (~part.length >>> 8) & 0xff;
    out.set(part, pos);
    pos += part.length;
  }
  out.set(u32be(adler32(raw)), pos);
  return out;
}

/** Encode one 8-bit grayscale image; `pixels` is row-major, length w*h. */
export function encodeGrayPng(width: number, height: number, pixels: Uint8Array): Uint8Array {
  if (width <= 0 || height <= 0 || pixels.length !== width * height) {
    throw new Error(`pixel buffer ${pixels.length} does not match ${width}x${height}`);
  }
  const ihdr = new Uint8Array(13);
  ihdr.set(u32be(width), 0);
  ihdr.set(u32be(height), 4);
  ihdr[8] = 8;
  ihdr[9] = 0;

  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0;
    raw.set(pixels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }

  const parts = [SIGNATURE, chunk("IHDR", ihdr), chunk("IDAT", zlibStored(raw)), chunk("IEND", new Uint8Array(0))];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

/** Read the dimensions from a PNG header without decoding pixel data. */
export function pngDimensions(png: Uint8Array): { width: number; height: number } {
  if (png.length < 24) throw new Error("not a PNG: too short");
  for (let i = 0; i < 8; i++) {
    if (png[i] !== SIGNATURE[i]) throw new Error("not a PNG: bad signature");
  }
  const width = (png[16] << 24) | (png[17] << 16) | (png[18] << 8) | png[19];
  const height = (png[20] << 24) | (png[21] << 16) | (png[22] << 8) | png[23];
  return { width: width >>> 0, height: height >>> 0 };
}
