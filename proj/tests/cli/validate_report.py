import json
import sys

import jsonschema


def main(schema_path, report_path):
    with open(schema_path) as f:
        schema = json.load(f)
    with open(report_path) as f:
        report = json.load(f)
    jsonschema.Draft202012Validator(schema).validate(report)
    print(f"{report_path}: valid")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
