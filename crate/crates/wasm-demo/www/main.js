import init, { darken_preview, gg_kernel, dot_blur } from "./pkg/lednet_wasm_demo.js";

const SCALE = 4;

function val(id) {
  const el = document.getElementById(id);
  document.getElementById(id + "-v").textContent = el.value;
  return Number(el.value);
}

function paint(canvas, width, height, rgba) {
  canvas.width = width * SCALE;
  canvas.height = height * SCALE;
  const small = new ImageData(new Uint8ClampedArray(rgba), width, height);
  const tmp = new OffscreenCanvas(width, height);
  tmp.getContext("2d").putImageData(small, 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function guarded(infoId, fn) {
  const info = document.getElementById(infoId);
  try {
    info.classList.remove("err");
    fn(info);
  } catch (e) {
    info.classList.add("err");
    info.textContent = String(e);
  }
}

function darken() {
  guarded("d-info", (info) => {
    const p = darken_preview(val("d-seed"), 64, val("d-base"), val("d-amp"), val("d-smooth"), val("d-iter"));
    paint(document.getElementById("d-canvas"), p.size(), 2 * p.size(), p.pixels());
    info.textContent = `mean luminance ${p.source_mean().toFixed(4)} -> ${p.dark_mean().toFixed(4)}, mean alpha ${p.alpha_mean().toFixed(3)}`;
    p.free();
  });
}

function kernel() {
  guarded("k-info", (info) => {
    const size = val("k-size");
    const taps = gg_kernel(val("k-sigma"), val("k-beta"), size);
    const max = Math.max(...taps);
    const rgba = new Uint8Array(size * size * 4);
    taps.forEach((t, i) => {
      const v = Math.round((255 * t) / max);
      rgba.set([v, v, v, 255], 4 * i);
    });
    paint(document.getElementById("k-canvas"), size, size, rgba);
    info.textContent = `center tap ${taps[(size * size - 1) / 2].toFixed(5)}, sum ${taps.reduce((a, b) => a + b, 0).toFixed(6)}`;
  });
}

function blur() {
  guarded("b-info", (info) => {
    const d = dot_blur(val("b-r"), val("b-speed"), val("b-radius"), val("b-delta"));
    paint(document.getElementById("b-canvas"), d.width(), d.height(), d.pixels());
    info.textContent = `white pixels: ${d.saturated_cr()} with clipping reverse, ${d.saturated_plain()} without`;
    d.free();
  });
}

await init();
for (const [prefix, fn] of [["d", darken], ["k", kernel], ["b", blur]]) {
  document.querySelectorAll(`input[id^="${prefix}-"]`).forEach((el) => el.addEventListener("input", fn));
  fn();
}
