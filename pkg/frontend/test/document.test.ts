import { describe, expect, it } from "vitest";

import { DocumentError, parseDocumentText,
         serializeDocument } from "../src/document.js";
import { LENET_PRESET_TEXT, MLP_PRESET_TEXT,
         SKIP_PRESET_TEXT } from "../src/presets.js";
import { EditorState } from "../src/state.js";

const PRESET_TEXTS = [MLP_PRESET_TEXT, LENET_PRESET_TEXT, SKIP_PRESET_TEXT];

describe("document parsing", () => {
  it("parses every bundled preset", () => {
    for (const text of PRESET_TEXTS) {
      const doc = parseDocumentText(text);
      expect(doc.capsules.length).toBeGreaterThan(0);
    }
  });

  it("serializes back to the exact preset bytes", () => {
    for (const text of PRESET_TEXTS) {
      expect(serializeDocument(parseDocumentText(text))).toBe(text);
    }
  });

  it("rejects malformed json with a path", () => {
    expect(() => parseDocumentText("{ nope")).toThrow(DocumentError);
  });

  it("rejects wrong format version", () => {
    const doc = JSON.parse(MLP_PRESET_TEXT);
    doc.format_version = "capsforge/9";
    expect(() => parseDocumentText(JSON.stringify(doc)))
      .toThrow(/format_version/);
  });

  it("rejects unresolved references", () => {
    const doc = JSON.parse(MLP_PRESET_TEXT);
    doc.connections[0].head = "h9";
    expect(() => parseDocumentText(JSON.stringify(doc))).toThrow(/h9/);
  });

  it("rejects empty capsule lists", () => {
    const doc = JSON.parse(MLP_PRESET_TEXT);
    doc.capsules = [];
    expect(() => parseDocumentText(JSON.stringify(doc)))
      .toThrow(/at least one capsule/);
  });
});

describe("editor round trip", () => {
  it("export(import(doc)) is canonically equal for all presets", () => {
    for (const text of PRESET_TEXTS) {
      const state = new EditorState();
      state.importText(text);
      expect(state.exportText()).toBe(text);
    }
  });

  it("positions are exported once nodes move, and restored on import", () => {
    const state = new EditorState();
    state.importText(MLP_PRESET_TEXT);
    state.moveNode("b", 321, 87);
    const exported = state.exportText();
    const doc = parseDocumentText(exported);
    expect((doc.metadata.positions as Record<string, [number, number]>).b)
      .toEqual([321, 87]);

    const restored = new EditorState();
    restored.importText(exported);
    expect(restored.node("b")!.x).toBe(321);
    expect(restored.node("b")!.y).toBe(87);
    // and the positions survive a second round trip byte-for-byte
    expect(restored.exportText()).toBe(exported);
  });

  it("failed import leaves the state untouched", () => {
    const state = new EditorState();
    state.importText(MLP_PRESET_TEXT);
    const before = state.exportText();
    expect(() => state.importText("not a document")).toThrow(DocumentError);
    expect(state.exportText()).toBe(before);
  });
});
