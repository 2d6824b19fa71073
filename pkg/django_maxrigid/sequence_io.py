"""
JSON sequence files.

A sequence file is one JSON object::

    {
      "schema_version": 1,
      "intrinsics": [[fx, s, cx], [0, fy, cy], [0, 0, 1]],
      "frames": [[{"u": 312.5, "v": 40.25, "visible": true},
                  {"u": null, "v": null, "visible": false}, ...], ...],
      "ground_truth": [[[x, y, z], null, ...], ...],
      "frame_index": [0, 1, ...]
    }

``ground_truth`` and ``frame_index`` are optional. Numbers are written with
the shortest representation that reads back to the same double.
"""
import json
import math
import numbers

import numpy as np

from django_maxrigid.exceptions import (
    InvalidIntrinsics,
    InvalidSequence,
    ParseError,
    UnsupportedVersion,
)
from django_maxrigid.geometry import CameraIntrinsics
from django_maxrigid.sequence import TrackedSequence
from django_maxrigid.utils import atomic_open

SCHEMA_VERSION = 1


def _number(value, location):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ParseError('expected a number, found %r' % (value,), location)
    value = float(value)
    if not math.isfinite(value):
        raise ParseError('expected a finite number', location)
    return value


def _list(value, location, length=None):
    if not isinstance(value, list):
        raise ParseError('expected a list', location)
    if length is not None and len(value) != length:
        raise ParseError('has %d entries, expected %d' % (len(value), length), location)
    return value


def sequence_to_dict(seq):
    frames = []
    for k in range(seq.n_frames):
        row = []
        for i in range(seq.n_points):
            if seq.visible[k, i]:
                u, v = seq.uv[k, i]
                row.append({'u': float(u), 'v': float(v), 'visible': True})
            else:
                row.append({'u': None, 'v': None, 'visible': False})
        frames.append(row)
    data = {
        'schema_version': SCHEMA_VERSION,
        'intrinsics': seq.intrinsics.to_list(),
        'frames': frames,
        'frame_index': seq.frame_index.tolist(),
    }
    if seq.has_ground_truth:
        data['ground_truth'] = [[[float(c) for c in point] for point in frame]
                                for frame in seq.ground_truth]
    return data


def sequence_from_dict(data):
    if not isinstance(data, dict):
        raise ParseError('a sequence file holds one JSON object', 'document')
    if 'schema_version' not in data:
        raise ParseError('missing field', 'schema_version')
    if data['schema_version'] != SCHEMA_VERSION:
        raise UnsupportedVersion('unsupported schema version %r' % (data['schema_version'],),
                                 'schema_version')

    rows = _list(data.get('intrinsics'), 'intrinsics', 3)
    k_matrix = [[_number(value, 'intrinsics[%d][%d]' % (r, c))
                 for c, value in enumerate(_list(row, 'intrinsics[%d]' % r, 3))]
                for r, row in enumerate(rows)]
    try:
        intrinsics = CameraIntrinsics(np.array(k_matrix))
    except InvalidIntrinsics as exc:
        raise ParseError(str(exc), 'intrinsics')

    frames = _list(data.get('frames'), 'frames')
    if not frames:
        raise ParseError('no frames', 'frames')
    n_points = len(_list(frames[0], 'frames[0]'))
    uv = np.full((len(frames), n_points, 2), np.nan)
    visible = np.zeros((len(frames), n_points), dtype=bool)
    for k, frame in enumerate(frames):
        _list(frame, 'frames[%d]' % k, n_points)
        for i, entry in enumerate(frame):
            location = 'frames[%d][%d]' % (k, i)
            if not isinstance(entry, dict) or not isinstance(entry.get('visible'), bool):
                raise ParseError('expected an object with a boolean "visible"', location)
            if entry['visible']:
                uv[k, i] = (_number(entry.get('u'), location + '.u'),
                            _number(entry.get('v'), location + '.v'))
                visible[k, i] = True

    ground_truth = None
    if data.get('ground_truth') is not None:
        ground_truth = np.full((len(frames), n_points, 3), np.nan)
        for k, frame in enumerate(_list(data['ground_truth'], 'ground_truth', len(frames))):
            for i, point in enumerate(_list(frame, 'ground_truth[%d]' % k, n_points)):
                location = 'ground_truth[%d][%d]' % (k, i)
                if point is None:
                    continue
                ground_truth[k, i] = [_number(c, location) for c in _list(point, location, 3)]

    frame_index = data.get('frame_index')
    if frame_index is not None:
        frame_index = [int(_number(f, 'frame_index')) for f in
                       _list(frame_index, 'frame_index', len(frames))]
    try:
        return TrackedSequence(intrinsics=intrinsics, uv=uv, visible=visible,
                               ground_truth=ground_truth, frame_index=frame_index)
    except InvalidSequence as exc:
        raise ParseError(str(exc), 'document')


def loads_sequence(text):
    try:
        data = json.loads(text)
    except ValueError as exc:
        location = None
        if isinstance(exc, json.JSONDecodeError):
            location = 'line %d column %d' % (exc.lineno, exc.colno)
        raise ParseError('invalid JSON: %s' % getattr(exc, 'msg', exc), location)
    return sequence_from_dict(data)


def dumps_sequence(seq):
    return json.dumps(sequence_to_dict(seq), sort_keys=True) + '\n'


def read_sequence(path):
    with open(path) as stream:
        return loads_sequence(stream.read())


def write_sequence(seq, path):
    with atomic_open(path) as stream:
        stream.write(dumps_sequence(seq))
    return path
