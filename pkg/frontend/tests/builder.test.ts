import { describe, expect, it } from "vitest";

import { GraphBuilder } from "../src/builder.js";
import { canonicalizeDocument, validateDocument } from "../src/runner.js";
import { ShapeError } from "../src/types.js";

describe("GraphBuilder construction", () => {
  it("builds z = x + y with three nodes", () => {
    const b = new GraphBuilder("add");
    const x = b.parameter("F64", [2]);
    const y = b.parameter("F64", [2]);
    b.result(b.add(x, y));
    const doc = b.document();
    expect(doc.nodes).toHaveLength(3);
    expect(doc.parameters).toEqual([1, 2]);
    expect(doc.results).toEqual([[3, 0]]);
  });

  it("raises shape errors before any subprocess", () => {
    const b = new GraphBuilder("bad");
    const x = b.parameter("F64", [2, 3]);
    const y = b.parameter("F64", [4, 4]);
    expect(() => b.dot(x, y)).toThrow(ShapeError);
  });

  it("rejects mismatched elementwise operands", () => {
    const b = new GraphBuilder("bad");
    const x = b.parameter("F64", [2]);
    const y = b.parameter("F64", [3]);
    expect(() => b.add(x, y)).toThrow(ShapeError);
  });

  it("rejects float-only ops on integers", () => {
    const b = new GraphBuilder("int");
    const x = b.parameter("I64", [2]);
    const y = b.parameter("I64", [2]);
    expect(() => b.div(x, y)).toThrow(ShapeError);
    expect(() => b.relu(x)).toThrow(ShapeError);
    expect(b.add(x, y).shape).toEqual([2]);
  });

  it("mirrors broadcast/sum/reshape/conv inference", () => {
    const b = new GraphBuilder("shapes");
    const v = b.parameter("F64", [3]);
    expect(b.broadcast(v, [2, 3], [0]).shape).toEqual([2, 3]);
    expect(() => b.broadcast(v, [2, 4], [0])).toThrow(ShapeError);
    const m = b.parameter("F64", [2, 3]);
    expect(b.sum(m, [0]).shape).toEqual([3]);
    expect(() => b.sum(m, [2])).toThrow(ShapeError);
    expect(b.reshape(m, [1, 0], [6]).shape).toEqual([6]);
    expect(() => b.reshape(m, [0, 0], [6])).toThrow(ShapeError);
    const img = b.parameter("F64", [1, 1, 4, 4]);
    const flt = b.parameter("F64", [1, 1, 3, 3]);
    expect(b.conv2d(img, flt).shape).toEqual([1, 1, 2, 2]);
    expect(() => b.conv2d(img, b.parameter("F64", [1, 2, 3, 3]))).toThrow(ShapeError);
  });

  it("softmax composite expands to seven nodes", () => {
    const b = new GraphBuilder("sm");
    const x = b.parameter("F64", [2, 4]);
    const out = b.softmax(x, 1);
    expect(out.shape).toEqual([2, 4]);
    expect(b.document().nodes).toHaveLength(8); // parameter + 7 composite nodes
  });
});

describe("GraphBuilder against the CLI", () => {
  function mlpDocument(): string {
    const b = new GraphBuilder("mlp");
    const x = b.parameter("F64", [2, 3]);
    const w1 = b.parameter("F64", [3, 4]);
    const w2 = b.parameter("F64", [4, 3]);
    const t = b.parameter("F64", [2, 3]);
    const hidden = b.relu(b.dot(x, w1));
    const probs = b.softmax(b.dot(hidden, w2), 1);
    b.result(b.sumAll(b.mul(probs, t)));
    return b.build();
  }

  it("emitted documents pass cmd_validate", () => {
    const docs = [
      mlpDocument(),
      (() => {
        const b = new GraphBuilder("mixed");
        const x = b.parameter("F64", [2, 2]);
        const c = b.constant("F64", [2, 2], [1.5, -0.5, 0.25, 2.0]);
        const m = b.maximum(x, c);
        b.result(b.convertLayout(m, [1, 0]));
        b.result(b.sum(b.exp(x), [0, 1], "max"));
        return b.build();
      })(),
      (() => {
        const b = new GraphBuilder("ints");
        const x = b.parameter("I64", [3]);
        const c = b.constant("I64", [3], [1, 2, 3]);
        b.result(b.neg(b.mul(x, c)));
        return b.build();
      })(),
    ];
    for (const doc of docs) {
      expect(validateDocument(doc)).toBe(true);
    }
  });

  it("builder output is already canonical (round-trips unchanged)", () => {
    const docs = [
      mlpDocument(),
      (() => {
        const b = new GraphBuilder("floats");
        b.result(
          b.constant("F64", [6], [0.1, 1e16, 1.5e-7, -0.0, 1 / 3, 123456.789]),
        );
        return b.build();
      })(),
      (() => {
        const b = new GraphBuilder("specials");
        b.result(b.constant("F64", [3], [NaN, Infinity, -Infinity]));
        return b.build();
      })(),
      (() => {
        const b = new GraphBuilder("f32");
        b.result(b.constant("F32", [3], [0.1, 2.5, -1e30]));
        return b.build();
      })(),
    ];
    for (const doc of docs) {
      expect(canonicalizeDocument(doc)).toBe(doc);
    }
  });

  it("random builder programs stay canonical", () => {
    let state = 0xbeef;
    const next = () => {
      state = (state * 1103515245 + 12345) & 0x7fffffff;
      return state / 0x7fffffff;
    };
    for (let trial = 0; trial < 10; trial++) {
      const b = new GraphBuilder(`rand${trial}`);
      const pool = [b.parameter("F64", [2, 3]), b.parameter("F64", [2, 3])];
      for (let i = 0; i < 8; i++) {
        const a = pool[Math.floor(next() * pool.length)];
        const roll = next();
        if (roll < 0.3) {
          const partner = pool[Math.floor(next() * pool.length)];
          pool.push(next() < 0.5 ? b.add(a, partner) : b.mul(a, partner));
        } else if (roll < 0.5) {
          pool.push(b.tanh(a));
        } else if (roll < 0.65) {
          pool.push(
            b.constant(
              "F64",
              [2, 3],
              Array.from({ length: 6 }, () => next() * 4 - 2),
            ),
          );
        } else if (roll < 0.8) {
          pool.push(b.sigmoid(a));
        } else {
          pool.push(b.reshape(b.reshape(a, [1, 0], [3, 2]), [1, 0], [2, 3]));
        }
      }
      b.result(pool[pool.length - 1]);
      const doc = b.build();
      expect(validateDocument(doc)).toBe(true);
      expect(canonicalizeDocument(doc)).toBe(doc);
    }
  });
});
