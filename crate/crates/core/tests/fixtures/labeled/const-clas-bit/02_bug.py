from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

q = QuantumRegister(3, "q")
c = ClassicalRegister(3, "c")
qc = QuantumCircuit(q, c)
qc.h(q[0])
qc.cx(q[0], q[1])
qc.measure(q, c)  # expect: const-clas-bit
