import unittest


class TestDocs(unittest.TestCase):
    def test_docs_completeness(self):
        from build_doc import check_docs_completeness, missing_doc_files

        self.assertEqual(missing_doc_files(), [])
        check_docs_completeness()

    def test_doc_examples_use_fixtures(self):
        import re
        from build_doc import DOC_FOLDER
        from polyflow.sample_data import fixture_names

        text = (DOC_FOLDER.parent / "README.md").read_text()
        names = re.findall(r"--manifold (\w+)", text)
        self.assertGreater(len(names), 0)
        for name in names:
            self.assertIn(name, fixture_names())


if __name__ == "__main__":
    unittest.main()
